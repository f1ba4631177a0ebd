"""Kernel selection: compiled Haar sampler when built, numpy otherwise."""

from . import _haar_np

try:
    from . import _haar_cy as _impl
except ImportError:
    _impl = _haar_np

BACKEND = _impl.BACKEND
haar_trace_samples = _impl.haar_trace_samples


def available_backends() -> dict:
    """Importable kernel implementations, keyed by backend name."""
    backends = {_haar_np.BACKEND: _haar_np}
    if _impl is not _haar_np:
        backends[_impl.BACKEND] = _impl
    return backends
