"""Numerical verification of the density-ratio machinery behind the bounds.

The mechanisms' privacy criterion is a bound on the mass of the violation
set, the outputs where the density ratio between neighboring inputs exceeds
e^eps.  For the unmasked setting that ratio has a one-dimensional closed
form and the violation probability is an exact Gaussian tail.  For the
masked settings the densities are Haar averages, which we estimate by
log-mean-exp over a pool of orthogonal draws shared between numerator and
denominator, with jackknife standard errors; the integrand spans many
orders of magnitude, hence the log-space treatment throughout.

Every verdict applies a fixed 3-standard-error rule, stated in the report.
"""

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernel
from .mechanisms import NeighborPair, release
from .quantiles import birge_tail_check, gaussian_quantile_bracket, gaussian_survival

__all__ = [
    "AuditScaleError",
    "AuditReport",
    "VERDICT_CONSISTENT",
    "VERDICT_VIOLATED",
    "log_density_ratio_A",
    "violation_probability_A_analytic",
    "violation_probability_MC",
    "log_g_function",
    "g_function",
    "g_ratio_bound_check",
    "sphere_integral_check",
    "density_ratio_bound_check_BC",
    "quantile_bracket_suite",
    "birge_suite",
    "DEFAULT_INNER_SAMPLES",
]

VERDICT_CONSISTENT = "consistent"
VERDICT_VIOLATED = "violated"

# Nested Haar Monte Carlo is O(samples * inner * n^3): desk scale only.
BC_AUDIT_MAX_N = 8
BC_AUDIT_MAX_P = 2
RATIO_CHECK_MAX_N = 6
SPHERE_MAX_DIM = 32
DEFAULT_INNER_SAMPLES = 100_000

# switch the G integral to the saddle-shifted variable above this
_G_SHIFT_THRESHOLD = 200.0
_EXP_OVERFLOW = 709.0


class AuditScaleError(ValueError):
    """The requested audit exceeds the desk-scale limits of the estimator."""


@dataclass(frozen=True)
class AuditReport:
    """One verification outcome with its uncertainty and references.

    verdict is "consistent" unless the 3-standard-error rule rejects:
    an analytic reference must lie within 3 SE of the estimate, and a bound
    reference must not be exceeded by estimate - 3 SE.
    """

    estimate: float
    std_error: float
    samples: int
    verdict: str
    analytic_reference: Optional[float] = None
    bound_reference: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "analytic_reference": self.analytic_reference,
            "bound_reference": self.bound_reference,
            "samples": self.samples,
            "verdict": self.verdict,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _verdict_against_analytic(estimate: float, se: float, reference: float) -> str:
    # the reference itself is quadrature/closed-form with ~1e-11 relative
    # error; the floor keeps zero-variance estimates from failing on roundoff
    slack = 3.0 * se + 1e-9 * max(1.0, abs(reference))
    return VERDICT_CONSISTENT if abs(estimate - reference) <= slack else VERDICT_VIOLATED


def _verdict_against_bound(estimate: float, se: float, bound: float) -> str:
    return VERDICT_CONSISTENT if estimate - 3.0 * se <= bound else VERDICT_VIOLATED


# --------------------------------------------------------------------------
# Setting A: closed forms
# --------------------------------------------------------------------------

def log_density_ratio_A(y, pair: NeighborPair, sigma: float) -> float:
    """log of p_{Y(base)}(y) / p_{Y(variant)}(y) under the unmasked mechanism.

    Only the differing row enters: with d the row difference, x1 the base
    row and y1 the released row, the log ratio is
    (||d||^2 + 2 x1.d) / (2 sigma^2) - y1.d / sigma^2.
    """
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != pair.base.values.shape:
        raise ValueError(f"y must have shape {pair.base.values.shape}, got {y.shape}")
    d = pair.delta
    x1 = pair.base.values[pair.row_index]
    y1 = y[pair.row_index]
    s2 = sigma * sigma
    return float((d @ d + 2.0 * (x1 @ d)) / (2.0 * s2) - (y1 @ d) / s2)


def violation_probability_A_analytic(pair: NeighborPair, sigma: float, epsilon: float) -> float:
    """Exact mass of the violation set under the unmasked mechanism.

    Equals P[Z > sigma*eps/||d|| - ||d||/(2 sigma)] for standard normal Z;
    zero when the neighbors coincide.
    """
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    dn = pair.delta_norm
    if dn == 0.0:
        return 0.0
    return gaussian_survival(sigma * epsilon / dn - dn / (2.0 * sigma))


# --------------------------------------------------------------------------
# Haar-averaged density estimation (settings B/C)
# --------------------------------------------------------------------------

def _log_mean_exp(logs: np.ndarray) -> float:
    m = float(np.max(logs))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.mean(np.exp(logs - m))))


def _lme_diff_jackknife(log_num: np.ndarray, log_den: np.ndarray):
    """Estimate LME(log_num) - LME(log_den) over a shared sample pool,
    with a leave-one-out standard error."""
    m = log_num.size

    def loo(logs):
        mx = float(np.max(logs))
        w = np.exp(logs - mx)
        s = float(np.sum(w))
        with np.errstate(divide="ignore"):
            return mx + np.log((s - w) / (m - 1))

    estimate = _log_mean_exp(log_num) - _log_mean_exp(log_den)
    loo_diff = loo(log_num) - loo(log_den)
    if not np.all(np.isfinite(loo_diff)):
        return estimate, math.inf
    se = math.sqrt((m - 1) / m * float(np.sum((loo_diff - np.mean(loo_diff)) ** 2)))
    return estimate, se


def _check_bc_scale(n: int, p: int, max_n: int) -> None:
    if n > max_n or p > BC_AUDIT_MAX_P:
        raise AuditScaleError(
            f"nested Haar estimation is limited to n <= {max_n}, p <= {BC_AUDIT_MAX_P} "
            f"(got n={n}, p={p}); the cost grows with the orthogonal-group dimension. "
            "Audit a smaller instance, or use the analytic setting-A checks."
        )


def _masked_log_ratio(y, pair: NeighborPair, sigma: float, inner_samples: int, seed: int):
    """Nested-MC estimate of the masked log density ratio at a released y.

    Shares one Haar pool between the two averaged densities and returns
    (log_ratio, jackknife_se); the norm prefactor is exact, so the error
    comes only from the Haar averages.
    """
    s2 = sigma * sigma
    x = pair.base.values
    xp = pair.variant.values
    targets = np.stack([y @ x.T, y @ xp.T]) / s2
    traces = _kernel.haar_trace_samples(targets, inner_samples, seed)
    diff, se = _lme_diff_jackknife(traces[0], traces[1])
    prefactor = (float(np.sum(xp * xp)) - float(np.sum(x * x))) / (2.0 * s2)
    return prefactor + diff, se


def violation_probability_MC(
    pair: NeighborPair,
    setting: str,
    sigma: float,
    epsilon: float,
    samples: int,
    seed: int,
    inner_samples: int = DEFAULT_INNER_SAMPLES,
    delta: Optional[float] = None,
) -> AuditReport:
    """Monte Carlo estimate of the violation-set mass P[log ratio > eps].

    Setting A draws the released differing row (the only row the closed-form
    ratio depends on) and compares against the exact Gaussian tail.  Settings
    B and C draw full releases and estimate each log ratio by nested Haar
    Monte Carlo.  The reported standard error is binomial; when `delta` is
    given it is attached as the bound the estimate is audited against.
    """
    if setting not in ("A", "B", "C"):
        raise ValueError(f"setting must be A, B or C, got {setting!r}")
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    rng = np.random.Generator(np.random.PCG64(seed))
    s2 = sigma * sigma

    if setting == "A":
        d = pair.delta
        x1 = pair.base.values[pair.row_index]
        const = (float(d @ d) + 2.0 * float(x1 @ d)) / (2.0 * s2)
        y1 = x1 + sigma * rng.standard_normal((samples, pair.base.p))
        log_ratios = const - (y1 @ d) / s2
        hits = int(np.count_nonzero(log_ratios > epsilon))
        analytic = violation_probability_A_analytic(pair, sigma, epsilon)
    else:
        _check_bc_scale(pair.base.n, pair.base.p, BC_AUDIT_MAX_N)
        release_seeds = rng.integers(0, 2**63, size=samples)
        pool_seeds = rng.integers(0, 2**63, size=samples)
        hits = 0
        for i in range(samples):
            y = release(pair.base, setting, sigma, int(release_seeds[i])).pseudo_data
            log_ratio, _ = _masked_log_ratio(y, pair, sigma, inner_samples, int(pool_seeds[i]))
            if log_ratio > epsilon:
                hits += 1
        analytic = None

    estimate = hits / samples
    se = math.sqrt(estimate * (1.0 - estimate) / samples)
    if analytic is not None:
        # rule SE floor under the reference, so p-hat in {0, 1} stays testable
        se_rule = max(se, math.sqrt(analytic * (1.0 - analytic) / samples))
        verdict = _verdict_against_analytic(estimate, se_rule, analytic)
    elif delta is not None:
        verdict = _verdict_against_bound(estimate, se, delta)
    else:
        verdict = VERDICT_CONSISTENT
    return AuditReport(
        estimate=estimate,
        std_error=se,
        samples=samples,
        verdict=verdict,
        analytic_reference=analytic,
        bound_reference=delta,
    )


# --------------------------------------------------------------------------
# The sphere-average integral G_q and its properties
# --------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)
_LOG_GL_WEIGHTS = np.log(_GL_WEIGHTS)


def _log_panel(logf, a: float, b: float) -> float:
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * _GL_NODES
    vals = logf(x) + _LOG_GL_WEIGHTS + math.log(half)
    m = float(np.max(vals))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(vals - m))))


def _adaptive_log_quad(logf, a: float, b: float, rel_tol: float = 1e-11, max_depth: int = 48) -> float:
    def refine(lo, hi, whole, depth):
        mid = 0.5 * (lo + hi)
        left = _log_panel(logf, lo, mid)
        right = _log_panel(logf, mid, hi)
        combined = np.logaddexp(left, right)
        if not math.isfinite(combined) and not math.isfinite(whole):
            return combined
        if depth >= max_depth or abs(combined - whole) <= rel_tol:
            return combined
        return np.logaddexp(refine(lo, mid, left, depth + 1), refine(mid, hi, right, depth + 1))

    return float(refine(a, b, _log_panel(logf, a, b), 0))


def _log_trig_integral(t: float, cos_power: int) -> float:
    """log of integral_{-pi/2}^{pi/2} exp(t sin theta) cos^k theta dtheta.

    This is integral_{-1}^{1} e^{tu} (1-u^2)^{(k-1)/2} du after u = sin theta,
    a substitution that removes the endpoint singularities for every k >= 0.
    """

    def logf(theta):
        with np.errstate(divide="ignore"):
            return t * np.sin(theta) + cos_power * np.log(np.cos(theta))

    return _adaptive_log_quad(logf, -0.5 * math.pi, 0.5 * math.pi)


def _log_g_shifted(q: int, t: float) -> float:
    # For large t the mass sits at u near 1; s = t(1-u) gives
    # log G = t - (q/2) ln t + log int_0^{2t} e^-s s^nu (2 - s/t)^nu ds.
    nu = 0.5 * (q - 2)

    def logf(s):
        if nu == 0.0:
            return -s
        with np.errstate(divide="ignore"):
            return -s + nu * (np.log(s) + np.log(2.0 - s / t))

    anchors = sorted({0.0, nu + 1.0, 8.0 * (nu + 1.0) + 60.0, 2.0 * t})
    anchors = [s for s in anchors if 0.0 <= s <= 2.0 * t]
    total = -math.inf
    for lo, hi in zip(anchors[:-1], anchors[1:]):
        if hi > lo:
            total = float(np.logaddexp(total, _adaptive_log_quad(logf, lo, hi)))
    return t - 0.5 * q * math.log(t) + total


def log_g_function(q: int, t: float) -> float:
    """log of G_q(t) = integral_{-1}^{1} e^{tu} (1 - u^2)^{(q-2)/2} du."""
    if int(q) != q or q < 2:
        raise ValueError(f"q must be an integer >= 2, got {q}")
    t = abs(float(t))  # G_q is even in t
    if t <= _G_SHIFT_THRESHOLD:
        return _log_trig_integral(t, int(q) - 1)
    return _log_g_shifted(int(q), t)


def g_function(q: int, t: float) -> float:
    """G_q(t); raises OverflowError past the double range (use log_g_function)."""
    lg = log_g_function(q, t)
    if lg > _EXP_OVERFLOW:
        raise OverflowError(
            f"G_{q}({t}) = exp({lg:.3f}) overflows a double; call log_g_function instead"
        )
    return math.exp(lg)


def g_ratio_bound_check(q: int, t1: float, t2: float) -> AuditReport:
    """Verify G_q(t2)/G_q(t1) <= exp(|t1^2 - t2^2| / (2q)) plus the derivative
    inequality 0 < G' < (t/q) G at the midpoint (central differences)."""
    if not (t1 > 0.0 and t2 > 0.0):
        raise ValueError(f"t1 and t2 must be positive, got {t1}, {t2}")
    log_ratio = log_g_function(q, t2) - log_g_function(q, t1)
    log_bound = abs(t1 * t1 - t2 * t2) / (2.0 * q)
    ratio_ok = log_ratio <= log_bound + 1e-9

    tm = 0.5 * (t1 + t2)
    h = 1e-5 * max(1.0, tm)
    lg_mid = log_g_function(q, tm)
    # derivative relative to G(tm): bounded even when G itself is huge
    dg_over_g = (
        math.exp(log_g_function(q, tm + h) - lg_mid) - math.exp(log_g_function(q, tm - h) - lg_mid)
    ) / (2.0 * h)
    deriv_ok = 0.0 < dg_over_g < tm / q

    return AuditReport(
        estimate=math.exp(min(log_ratio, _EXP_OVERFLOW)),
        std_error=0.0,
        samples=0,
        verdict=VERDICT_CONSISTENT if (ratio_ok and deriv_ok) else VERDICT_VIOLATED,
        bound_reference=math.exp(min(log_bound, _EXP_OVERFLOW)),
    )


def _log_cbar(q: int) -> float:
    # normalizing constant of the first-coordinate density on the unit sphere
    return 0.5 * math.log(math.pi) + math.lgamma(0.5 * (q - 1)) - math.lgamma(0.5 * q)


def sphere_integral_check(
    n: int,
    q: int,
    v,
    subspace_seed: int,
    mc_samples: int = 100_000,
) -> AuditReport:
    """Monte Carlo vs quadrature for the uniform sphere average of e^{b.v}.

    A random q-dimensional subspace is drawn as an orthonormal frame; the
    average of e^{b.v} over the unit sphere of that subspace must equal the
    one-dimensional integral of e^{||proj v|| u} against the first-coordinate
    sphere density (1-u^2)^{(q-3)/2} / cbar_q.
    """
    if int(q) != q or q < 2:
        raise ValueError(f"q must be an integer >= 2, got {q}")
    if q > n:
        raise ValueError(f"q={q} exceeds the ambient dimension n={n}")
    if n > SPHERE_MAX_DIM:
        raise ValueError(f"n={n} exceeds the check's cap {SPHERE_MAX_DIM}")
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != n:
        raise ValueError(f"v must have length n={n}, got {v.shape[0]}")

    rng = np.random.Generator(np.random.PCG64(subspace_seed))
    frame, r = np.linalg.qr(rng.standard_normal((n, int(q))))
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    frame = frame * signs

    w = frame.T @ v  # b.v = s.(F^T v) for b = F s, s on the q-sphere
    proj_norm = float(np.linalg.norm(w))
    analytic = math.exp(_log_trig_integral(proj_norm, int(q) - 2) - _log_cbar(int(q)))

    z = rng.standard_normal((int(mc_samples), int(q)))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    vals = np.exp(z @ w)
    estimate = float(np.mean(vals))
    se = float(np.std(vals, ddof=1)) / math.sqrt(mc_samples)

    return AuditReport(
        estimate=estimate,
        std_error=se,
        samples=int(mc_samples),
        verdict=_verdict_against_analytic(estimate, se, analytic),
        analytic_reference=analytic,
    )


# --------------------------------------------------------------------------
# Masked density-ratio bound
# --------------------------------------------------------------------------

def density_ratio_bound_check_BC(
    pair: NeighborPair,
    sigma: float,
    samples: int,
    seed: int,
    inner_samples: int = DEFAULT_INNER_SAMPLES,
) -> AuditReport:
    """Check the masked density-ratio upper bound on sampled releases.

    For each y drawn from the masked mechanism, the estimated log ratio minus
    3 nested-MC standard errors must not exceed
    (||X'||^2 - ||X||^2)/(2 sigma^2) + p ||y||^2 / ((n-p) sigma^4).
    The report carries the worst margin (estimate) and its standard error.
    """
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    n, p = pair.base.n, pair.base.p
    if n <= p:
        raise ValueError(f"the bound requires n > p, got n={n}, p={p}")
    _check_bc_scale(n, p, RATIO_CHECK_MAX_N)

    rng = np.random.Generator(np.random.PCG64(seed))
    release_seeds = rng.integers(0, 2**63, size=samples)
    pool_seeds = rng.integers(0, 2**63, size=samples)
    s2 = sigma * sigma

    worst_margin = -math.inf
    worst_se = 0.0
    for i in range(samples):
        y = release(pair.base, "B", sigma, int(release_seeds[i])).pseudo_data
        log_ratio, se = _masked_log_ratio(y, pair, sigma, inner_samples, int(pool_seeds[i]))
        prefactor = (float(np.sum(pair.variant.values**2)) - float(np.sum(pair.base.values**2))) / (2.0 * s2)
        log_bound = prefactor + p * float(np.sum(y * y)) / ((n - p) * s2 * s2)
        margin = log_ratio - log_bound
        if margin > worst_margin:
            worst_margin = margin
            worst_se = se

    return AuditReport(
        estimate=worst_margin,
        std_error=worst_se,
        samples=samples,
        verdict=_verdict_against_bound(worst_margin, worst_se, 0.0),
        bound_reference=0.0,
    )


# --------------------------------------------------------------------------
# Closed-form inequality suites (shared by the CLI)
# --------------------------------------------------------------------------

def bracket_grid() -> list:
    """The dyadic-decade delta grid {10^-k / 2^j} below 0.05.

    Its largest point is 0.025; the bracket's lower inequality actually fails
    on (~0.0314, 0.05), so grids must stay below that.
    """
    points = set()
    for k in range(1, 13):
        for j in range(0, 4):
            delta = 10.0**-k / 2.0**j
            if delta < 0.05:
                points.add(delta)
    return sorted(points)


def quantile_bracket_suite(deltas=None) -> AuditReport:
    """Gaussian quantile bracket over a delta grid: zero failures expected."""
    if deltas is None:
        deltas = bracket_grid()
    failures = 0
    for delta in deltas:
        br = gaussian_quantile_bracket(float(delta))
        if not (br.lower < br.exact < br.upper):
            failures += 1
    count = len(deltas)
    return AuditReport(
        estimate=(count - failures) / count,
        std_error=0.0,
        samples=count,
        verdict=VERDICT_CONSISTENT if failures == 0 else VERDICT_VIOLATED,
        bound_reference=1.0,
    )


def birge_suite(dofs=(1, 10, 100, 1000), xs=(0.01, 0.1, 1.0, 5.0, 20.0)) -> AuditReport:
    """Chi-square deviation inequality over the stated grid: zero failures."""
    total = 0
    failures = 0
    for dof in dofs:
        for x in xs:
            total += 1
            check = birge_tail_check(dof, x)
            if not check.tail_prob <= check.bound_prob:
                failures += 1
    return AuditReport(
        estimate=(total - failures) / total,
        std_error=0.0,
        samples=total,
        verdict=VERDICT_CONSISTENT if failures == 0 else VERDICT_VIOLATED,
        bound_reference=1.0,
    )
