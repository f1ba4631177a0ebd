"""Release mechanisms: Gaussian noise with optional Haar-orthogonal masking.

Setting A releases X + C, setting B releases A(X + C), setting C releases
AX + C, where C has i.i.d. N(0, sigma^2) entries and A is uniform on the
orthogonal group.  One user seed deterministically derives independent
sub-streams for the mask and the noise, so artifacts replay exactly.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SETTINGS",
    "MAX_HAAR_DIM",
    "DataMatrix",
    "OrthogonalMatrix",
    "ReleaseArtifact",
    "NeighborPair",
    "sample_haar_orthogonal",
    "sample_noise",
    "release",
    "release_components",
    "make_neighbor",
]

SETTINGS = ("A", "B", "C")
# dense n x n mask sampling; desk-scale guard
MAX_HAAR_DIM = 16384

_ENTRY_TOL = 1e-12


@dataclass(frozen=True)
class DataMatrix:
    """An n x p real matrix with every entry bounded by 1 in magnitude."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"data must be a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("data entries must be finite")
        peak = float(np.max(np.abs(arr))) if arr.size else 0.0
        if peak > 1.0:
            raise ValueError(f"entries must satisfy |x| <= 1, found magnitude {peak}")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class OrthogonalMatrix:
    """An n x n orthogonal matrix along with the seed that produced it."""

    values: np.ndarray
    seed: int

    def __post_init__(self):
        q = np.asarray(self.values, dtype=np.float64)
        n = q.shape[0]
        if q.ndim != 2 or q.shape[1] != n:
            raise ValueError(f"expected a square matrix, got shape {q.shape}")
        residual = float(np.max(np.abs(q.T @ q - np.eye(n))))
        if residual >= 1e-10:
            raise ValueError(f"orthogonality residual {residual:.3e} exceeds 1e-10")
        object.__setattr__(self, "values", q)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ReleaseArtifact:
    """Released pseudo-data plus the metadata needed for exact replay."""

    pseudo_data: np.ndarray
    setting: str
    sigma: float
    seed: int

    @property
    def n(self) -> int:
        return self.pseudo_data.shape[0]

    @property
    def p(self) -> int:
        return self.pseudo_data.shape[1]

    def sidecar(self) -> dict:
        return {
            "setting": self.setting,
            "sigma": self.sigma,
            "seed": self.seed,
            "n": self.n,
            "p": self.p,
        }

    def save(self, csv_path, sidecar_path=None) -> None:
        """Write the pseudo-data CSV and its JSON sidecar."""
        csv_path = Path(csv_path)
        if sidecar_path is None:
            sidecar_path = csv_path.with_suffix(".json")
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.pseudo_data:
                writer.writerow([repr(float(v)) for v in row])
        Path(sidecar_path).write_text(json.dumps(self.sidecar(), indent=2) + "\n")

    @classmethod
    def load(cls, csv_path, sidecar_path=None) -> "ReleaseArtifact":
        csv_path = Path(csv_path)
        if sidecar_path is None:
            sidecar_path = csv_path.with_suffix(".json")
        meta = json.loads(Path(sidecar_path).read_text())
        data = np.loadtxt(csv_path, delimiter=",", ndmin=2)
        return cls(
            pseudo_data=data,
            setting=meta["setting"],
            sigma=float(meta["sigma"]),
            seed=int(meta["seed"]),
        )


@dataclass(frozen=True)
class NeighborPair:
    """Two data matrices identical except in one row, difference norm <= 1."""

    base: DataMatrix
    variant: DataMatrix
    row_index: int
    delta_norm: float

    @property
    def delta(self) -> np.ndarray:
        """The differing row of variant - base (the only nonzero row)."""
        return self.variant.values[self.row_index] - self.base.values[self.row_index]


def _generator(seed_source) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_source))


def _component_streams(seed: int):
    """Independent (mask, noise) generators derived from one user seed."""
    mask_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return _generator(mask_ss), _generator(noise_ss)


def sample_haar_orthogonal(n: int, seed: int) -> OrthogonalMatrix:
    """Draw an n x n matrix uniform over the orthogonal group.

    QR factorization of an i.i.d. standard normal matrix, with column signs
    flipped so the triangular factor has a positive diagonal; that sign
    convention is what makes the factor Haar-distributed rather than merely
    orthogonal.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if n > MAX_HAAR_DIM:
        raise ValueError(f"n={n} exceeds the dense sampling cap {MAX_HAAR_DIM}")
    rng = _generator(seed)
    return OrthogonalMatrix(values=_haar_from_rng(rng, int(n)), seed=int(seed))


def _haar_from_rng(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0.0] = 1.0
    return q * d


def sample_noise(n: int, p: int, sigma: float, seed: int) -> np.ndarray:
    """An n x p matrix of i.i.d. N(0, sigma^2) entries, deterministic in seed."""
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rng = _generator(seed)
    return sigma * rng.standard_normal((int(n), int(p)))


def release_components(data: DataMatrix, setting: str, sigma: float, seed: int):
    """Run one release, returning (mask, noise, artifact).

    The mask is None in setting A.  Identical inputs produce bit-identical
    outputs; the noise stream does not depend on the setting, so settings A
    and B with the same seed share the same C.
    """
    if setting not in SETTINGS:
        raise ValueError(f"setting must be one of {SETTINGS}, got {setting!r}")
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if setting != "A" and data.n > MAX_HAAR_DIM:
        raise ValueError(f"n={data.n} exceeds the dense masking cap {MAX_HAAR_DIM}")
    mask_rng, noise_rng = _component_streams(int(seed))
    noise = sigma * noise_rng.standard_normal((data.n, data.p))
    mask = None
    if setting == "A":
        pseudo = data.values + noise
    else:
        mask = _haar_from_rng(mask_rng, data.n)
        if setting == "B":
            pseudo = mask @ (data.values + noise)
        else:
            pseudo = mask @ data.values + noise
    artifact = ReleaseArtifact(pseudo_data=pseudo, setting=setting, sigma=float(sigma), seed=int(seed))
    return mask, noise, artifact


def release(data: DataMatrix, setting: str, sigma: float, seed: int) -> ReleaseArtifact:
    """Release a pseudo-data matrix under setting A, B or C."""
    return release_components(data, setting, sigma, seed)[2]


def make_neighbor(base: DataMatrix, row: int, delta) -> NeighborPair:
    """Replace one row of base by base_row + delta.

    delta must have norm at most 1 and the perturbed row must stay within
    [-1, 1] entrywise.
    """
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    if delta.shape[0] != base.p:
        raise ValueError(f"delta must have length p={base.p}, got {delta.shape[0]}")
    if not 0 <= row < base.n:
        raise ValueError(f"row index {row} out of range for n={base.n}")
    norm = float(np.linalg.norm(delta))
    if norm > 1.0 + _ENTRY_TOL:
        raise ValueError(f"neighbor difference norm must be <= 1, got {norm}")
    new_row = base.values[row] + delta
    if float(np.max(np.abs(new_row))) > 1.0 + _ENTRY_TOL:
        raise ValueError("perturbed row leaves the [-1, 1] entry range")
    variant_values = base.values.copy()
    # clip only absorbs the roundoff grace admitted above
    variant_values[row] = np.clip(new_row, -1.0, 1.0)
    actual_norm = float(np.linalg.norm(variant_values[row] - base.values[row]))
    return NeighborPair(
        base=base,
        variant=DataMatrix(variant_values),
        row_index=int(row),
        delta_norm=min(actual_norm, 1.0),
    )
