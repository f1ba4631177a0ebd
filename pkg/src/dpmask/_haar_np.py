"""numpy fallback for the Haar trace-sampling hot loop.

Batched QR factorizations of stacked Gaussian matrices, sign-corrected so
the triangular factors have positive diagonals (the Haar convention).
"""

import numpy as np

BACKEND = "numpy"

_DEFAULT_CHUNK = 32768


def haar_trace_samples(mats, count: int, seed: int, chunk: int = _DEFAULT_CHUNK) -> np.ndarray:
    """Sample tr(A @ mats[j]) for `count` Haar-orthogonal A.

    mats is one (n, n) matrix or a stack of k of them; the same A draws are
    used for every j, so ratios of the resulting averages share randomness.
    Returns an array of shape (k, count).
    """
    mats = np.ascontiguousarray(np.asarray(mats, dtype=np.float64))
    if mats.ndim == 2:
        mats = mats[None, :, :]
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValueError(f"expected (k, n, n) matrices, got shape {mats.shape}")
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    k, n, _ = mats.shape
    rng = np.random.Generator(np.random.PCG64(seed))
    out = np.empty((k, count), dtype=np.float64)
    done = 0
    while done < count:
        c = min(chunk, count - done)
        g = rng.standard_normal((c, n, n))
        q, r = np.linalg.qr(g)
        d = np.sign(np.diagonal(r, axis1=1, axis2=2)).copy()
        d[d == 0.0] = 1.0
        q *= d[:, None, :]
        # tr(Q_m @ T_j) = sum_{l,c} Q[m,l,c] T[j,c,l]
        out[:, done : done + c] = np.einsum("mlc,jcl->jm", q, mats, optimize=True)
        done += c
    return out
