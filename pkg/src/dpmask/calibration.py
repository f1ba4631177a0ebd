"""Noise-scale calibration for the three pseudo-data release settings.

Setting A adds i.i.d. Gaussian noise to the data matrix; settings B and C
additionally mask with a Haar-random orthogonal matrix (noise-then-mask and
mask-then-noise respectively, which share one sufficient bound).  Each
``sigma_*`` function returns the smallest standard deviation certified by one
closed-form condition; ``calibrate`` collects them all and reports which
formula binds.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .quantiles import chisq_quantile_bound, chisq_upper_quantile, gaussian_upper_quantile

__all__ = [
    "RegimeError",
    "PrivacyBudget",
    "ProblemShape",
    "CalibrationReport",
    "BINDING_A_SUFFICIENT",
    "BINDING_BC_THEOREM2",
    "sigma_necessary_A",
    "sigma_sufficient_A",
    "sigma_sufficient_A_simple",
    "sigma_thm2_BC",
    "sigma_joint_BC",
    "sigma_cor3_BC",
    "sigma_cor4_BC",
    "calibrate",
    "table1",
    "table1_csv",
    "TABLE1_HEADER",
]

BINDING_A_SUFFICIENT = "A_sufficient"
BINDING_BC_THEOREM2 = "BC_theorem2"
_BINDING_TIE_TOL = 1e-9


class RegimeError(ValueError):
    """A bound was requested outside the regime in which it is proved."""


@dataclass(frozen=True)
class PrivacyBudget:
    """The (epsilon, delta) privacy target.

    Only global validity is enforced here; formula-specific regimes
    (epsilon < 1, delta < 0.05, ...) are checked by each operation.
    """

    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class ProblemShape:
    """Data matrix dimensions: n records (rows) by p attributes (columns)."""

    n: int
    p: int

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be a positive integer, got {self.p}")
        if int(self.n) != self.n or self.n <= self.p:
            raise ValueError(f"n > p required, got n={self.n}, p={self.p}")


def _require_regime(ok: bool, constraint: str, value: float) -> None:
    if not ok:
        raise RegimeError(f"{constraint} required, got {value}")


# --------------------------------------------------------------------------
# Setting A (noise only).  The public bounds fix the worst-case neighbor
# difference norm at 1; the underscore variants take it explicitly.
# --------------------------------------------------------------------------

def _check_setting_A_regime(budget: PrivacyBudget) -> None:
    _require_regime(budget.delta < 0.5, "delta < 1/2", budget.delta)
    _require_regime(budget.epsilon < 1.0, "epsilon < 1", budget.epsilon)


def _sigma_necessary_A(epsilon: float, delta: float, delta_norm: float) -> float:
    return delta_norm * gaussian_upper_quantile(delta) / epsilon


def _sigma_sufficient_A(epsilon: float, delta: float, delta_norm: float) -> float:
    g = gaussian_upper_quantile(delta)
    return delta_norm * (g / epsilon) * (1.0 + 1.0 / (2.0 * g * g))


def sigma_necessary_A(budget: PrivacyBudget) -> float:
    """Necessary noise scale for setting A: quantile / epsilon."""
    _check_setting_A_regime(budget)
    return _sigma_necessary_A(budget.epsilon, budget.delta, 1.0)


def sigma_sufficient_A(budget: PrivacyBudget) -> float:
    """Sufficient noise scale for setting A, within ~10% of the necessary one."""
    _check_setting_A_regime(budget)
    return _sigma_sufficient_A(budget.epsilon, budget.delta, 1.0)


def sigma_sufficient_A_simple(budget: PrivacyBudget) -> float:
    """Looser closed form 1.7 sqrt(ln(1/delta)) / epsilon (delta < 0.05)."""
    _require_regime(budget.delta < 0.05, "delta < 0.05", budget.delta)
    _require_regime(budget.epsilon < 1.0, "epsilon < 1", budget.epsilon)
    return 1.7 * math.sqrt(math.log(1.0 / budget.delta)) / budget.epsilon


# --------------------------------------------------------------------------
# Settings B and C (orthogonal masking)
# --------------------------------------------------------------------------

def sigma_thm2_BC(budget: PrivacyBudget, shape: ProblemShape) -> float:
    """Root of the quartic sufficient condition for the masked settings.

    With b = (n-p) sqrt(p) + 2 p q, q the upper delta-quantile of chi-square
    with n*p degrees of freedom, returns the larger root of
    eps (n-p) s^4 - b s^2 - 2 n p^2 = 0 in s.
    """
    n, p = shape.n, shape.p
    eps = budget.epsilon
    q = chisq_upper_quantile(budget.delta, n * p)
    b = (n - p) * math.sqrt(p) + 2.0 * p * q
    sigma_sq = (b + math.sqrt(b * b + 8.0 * n * p * p * (n - p) * eps)) / (2.0 * (n - p) * eps)
    return math.sqrt(sigma_sq)


def sigma_joint_BC(budget: PrivacyBudget, shape: ProblemShape) -> tuple[float, str]:
    """Best sufficient scale for settings B/C: min of the A bound and the
    masked bound, tagged with which formula binds.

    If the setting-A regime does not apply, the masked bound is returned
    alone.  Ties within 1e-9 report the A bound for determinism.
    """
    bc = sigma_thm2_BC(budget, shape)
    try:
        a = sigma_sufficient_A(budget)
    except RegimeError:
        return bc, BINDING_BC_THEOREM2
    if a <= bc + _BINDING_TIE_TOL:
        return a, BINDING_A_SUFFICIENT
    return bc, BINDING_BC_THEOREM2


def sigma_cor3_BC(budget: PrivacyBudget, shape: ProblemShape) -> float:
    """Relaxed masked bound sqrt(max(2, 4np^2/((n-p)eps), 4pq/((n-p)eps)))."""
    _require_regime(budget.epsilon < 1.0, "epsilon < 1", budget.epsilon)
    n, p = shape.n, shape.p
    eps = budget.epsilon
    q = chisq_upper_quantile(budget.delta, n * p)
    sigma_sq = max(
        2.0,
        4.0 * n * p * p / ((n - p) * eps),
        4.0 * p * q / ((n - p) * eps),
    )
    return math.sqrt(sigma_sq)


def sigma_cor4_BC(budget: PrivacyBudget, shape: ProblemShape) -> float:
    """Fully closed-form masked bound using the chi-square quantile bound."""
    _require_regime(budget.epsilon < 1.0, "epsilon < 1", budget.epsilon)
    _require_regime(budget.delta < 1.0, "delta < 1", budget.delta)
    n, p = shape.n, shape.p
    bound = chisq_quantile_bound(budget.delta, n * p)
    return math.sqrt(bound / (n - p)) * math.sqrt(4.0 * p / budget.epsilon)


# --------------------------------------------------------------------------
# Aggregate report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationReport:
    """Every sigma bound for one (epsilon, delta, n, p), regime errors kept
    per field instead of aborting the whole report."""

    epsilon: float
    delta: float
    n: int
    p: int
    sigma_necessary_A: Optional[float] = None
    sigma_sufficient_A: Optional[float] = None
    sigma_thm2_BC: Optional[float] = None
    sigma_joint_BC: Optional[float] = None
    sigma_cor3_BC: Optional[float] = None
    sigma_cor4_BC: Optional[float] = None
    binding_formula: Optional[str] = None
    ratio_BC_over_A: Optional[float] = None
    regime_errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "epsilon": _sig6(self.epsilon),
            "delta": _sig6(self.delta),
            "n": self.n,
            "p": self.p,
            "sigma_necessary_A": _sig6(self.sigma_necessary_A),
            "sigma_sufficient_A": _sig6(self.sigma_sufficient_A),
            "sigma_thm2_BC": _sig6(self.sigma_thm2_BC),
            "sigma_joint_BC": _sig6(self.sigma_joint_BC),
            "sigma_cor3_BC": _sig6(self.sigma_cor3_BC),
            "sigma_cor4_BC": _sig6(self.sigma_cor4_BC),
            "binding_formula": self.binding_formula,
            "ratio_BC_over_A": _sig6(self.ratio_BC_over_A),
            "regime_errors": dict(self.regime_errors),
        }
        return out

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _sig6(x: Optional[float]):
    if x is None:
        return None
    return float(f"{x:.6g}")


def calibrate(budget: PrivacyBudget, shape: ProblemShape) -> CalibrationReport:
    """Compute every bound, recording per-field regime errors."""
    values: dict[str, Optional[float]] = {}
    errors: dict[str, str] = {}

    def attempt(name, fn, *args):
        try:
            values[name] = fn(*args)
        except RegimeError as exc:
            values[name] = None
            errors[name] = str(exc)

    attempt("sigma_necessary_A", sigma_necessary_A, budget)
    attempt("sigma_sufficient_A", sigma_sufficient_A, budget)
    attempt("sigma_thm2_BC", sigma_thm2_BC, budget, shape)
    attempt("sigma_cor3_BC", sigma_cor3_BC, budget, shape)
    attempt("sigma_cor4_BC", sigma_cor4_BC, budget, shape)

    joint, binding = sigma_joint_BC(budget, shape)
    suf_a = values.get("sigma_sufficient_A")
    ratio = joint / suf_a if suf_a else None
    return CalibrationReport(
        epsilon=budget.epsilon,
        delta=budget.delta,
        n=shape.n,
        p=shape.p,
        sigma_necessary_A=values["sigma_necessary_A"],
        sigma_sufficient_A=suf_a,
        sigma_thm2_BC=values["sigma_thm2_BC"],
        sigma_joint_BC=joint,
        sigma_cor3_BC=values["sigma_cor3_BC"],
        sigma_cor4_BC=values["sigma_cor4_BC"],
        binding_formula=binding,
        ratio_BC_over_A=ratio,
        regime_errors=errors,
    )


# --------------------------------------------------------------------------
# Bound-comparison table
# --------------------------------------------------------------------------

TABLE1_HEADER = "epsilon,delta,p,n,sigma_nec_A,sigma_suf_A,sigma_BC,ratio"

DEFAULT_EPSILONS = (0.1, 0.01, 0.001)
DEFAULT_DELTAS = (0.01, 0.001)
DEFAULT_PS = (1, 5, 20)
DEFAULT_NS = (100, 1000, 10000)


def table1(epsilons=DEFAULT_EPSILONS, deltas=DEFAULT_DELTAS, ps=DEFAULT_PS, ns=DEFAULT_NS):
    """Reports over the bound-comparison grid, in grid order
    (epsilon, then delta, then p, then n)."""
    rows = []
    for eps in epsilons:
        for delta in deltas:
            for p in ps:
                for n in ns:
                    rows.append(calibrate(PrivacyBudget(eps, delta), ProblemShape(n, p)))
    return rows


def table1_csv(rows) -> str:
    def cell(x, fmt="{:.6g}"):
        return "" if x is None else fmt.format(x)

    lines = [TABLE1_HEADER]
    for r in rows:
        lines.append(
            f"{r.epsilon:g},{r.delta:g},{r.p},{r.n},"
            f"{cell(r.sigma_necessary_A)},{cell(r.sigma_sufficient_A)},"
            f"{cell(r.sigma_joint_BC)},{cell(r.ratio_BC_over_A, '{:.6f}')}"
        )
    return "\n".join(lines) + "\n"
