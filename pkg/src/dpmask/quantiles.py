"""Upper-tail quantiles for the standard Gaussian and central chi-square laws.

Everything here is pure and stdlib-only.  Quantiles are obtained by bracketed
bisection refined with Newton steps on the log-survival function, which
converges unconditionally and does not rely on closed-form inverse
approximations.  The regularized incomplete gamma function uses the classic
series / continued-fraction split at x = a + 1.
"""

import math
from typing import NamedTuple

__all__ = [
    "QuantileBracket",
    "BirgeTailCheck",
    "gaussian_survival",
    "gaussian_upper_quantile",
    "gaussian_quantile_bracket",
    "chisq_survival",
    "chisq_upper_quantile",
    "chisq_quantile_bound",
    "birge_tail_check",
]

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)
# Above this the quantile search degrades to Wilson-Hilferty plus two Newton
# refinements (1e-6 relative instead of 1e-8).
WILSON_HILFERTY_DOF = 10_000_000


class QuantileBracket(NamedTuple):
    """Closed-form bracket around an exact Gaussian upper quantile."""

    lower: float
    exact: float
    upper: float


class BirgeTailCheck(NamedTuple):
    bound_prob: float
    tail_prob: float


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"tail probability must lie in (0, 1), got {delta}")
    return delta


def _check_dof(dof: int) -> int:
    if int(dof) != dof or dof < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {dof}")
    return int(dof)


# --------------------------------------------------------------------------
# Gaussian
# --------------------------------------------------------------------------

def gaussian_survival(t: float) -> float:
    """P[Z > t] for Z ~ N(0, 1)."""
    return 0.5 * math.erfc(t / _SQRT2)


def _log_gaussian_survival(t: float) -> float:
    if t < 30.0:
        s = gaussian_survival(t)
        return math.log(s) if s > 0.0 else -math.inf
    # asymptotic expansion; erfc underflows near t ~ 38
    t2 = t * t
    series = -1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2)
    return -0.5 * t2 - math.log(t) - _LN_SQRT_2PI + math.log1p(series)


def _log_gaussian_pdf(t: float) -> float:
    return -0.5 * t * t - _LN_SQRT_2PI


def gaussian_upper_quantile(delta: float) -> float:
    """t such that P[Z > t] = delta, to better than 1e-9 absolute."""
    delta = _check_delta(delta)
    if delta == 0.5:
        return 0.0
    if delta > 0.5:
        return -gaussian_upper_quantile(1.0 - delta)
    log_delta = math.log(delta)
    lo, hi = 0.0, 1.0
    while _log_gaussian_survival(hi) > log_delta:
        lo, hi = hi, 2.0 * hi
    t = 0.5 * (lo + hi)
    for _ in range(200):
        f = _log_gaussian_survival(t) - log_delta
        if f == 0.0:
            return t
        if f > 0.0:
            lo = t
        else:
            hi = t
        step = f / math.exp(_log_gaussian_pdf(t) - _log_gaussian_survival(t))
        t_new = t + step  # survival decreases: f > 0 means t too small
        if t_new == t:
            return t
        if not lo <= t_new <= hi:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) < 1e-13 * max(1.0, abs(t)):
            return t_new
        t = t_new
    return t


def gaussian_quantile_bracket(delta: float) -> QuantileBracket:
    """Bracket sqrt(ln(1/d)) < quantile < sqrt(2 ln(1/d)), valid for d < 0.05."""
    delta = _check_delta(delta)
    if delta >= 0.05:
        raise ValueError(f"bracket requires delta < 0.05, got {delta}")
    log_inv = math.log(1.0 / delta)
    return QuantileBracket(
        lower=math.sqrt(log_inv),
        exact=gaussian_upper_quantile(delta),
        upper=math.sqrt(2.0 * log_inv),
    )


# --------------------------------------------------------------------------
# Regularized incomplete gamma (series for x < a+1, continued fraction above)
# --------------------------------------------------------------------------

def _stirling_error(a: float) -> float:
    # lgamma(a) - [(a - 1/2) ln a - a + ln sqrt(2 pi)]
    inv = 1.0 / a
    inv2 = inv * inv
    return inv / 12.0 - inv * inv2 / 360.0 + inv * inv2 * inv2 / 1260.0


def _log_gamma_prefactor(a: float, x: float) -> float:
    """log(x^a e^-x / Gamma(a)), computed without catastrophic cancellation."""
    if x <= 0.0:
        return -math.inf
    if a < 20.0:
        return a * math.log(x) - x - math.lgamma(a)
    u = (x - a) / a
    return (
        a * (math.log1p(u) - u)
        + 0.5 * math.log(a)
        - _LN_SQRT_2PI
        - _stirling_error(a)
    )


def _gamma_p_series(a: float, x: float) -> float:
    # lower regularized P(a, x), series representation
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(10_000_000):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(_log_gamma_prefactor(a, x))


def _gamma_q_cf(a: float, x: float) -> float:
    # upper regularized Q(a, x), modified Lentz continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, 10_000_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(_log_gamma_prefactor(a, x)) * h


def _gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if x < 0.0 or a <= 0.0:
        raise ValueError("gamma_q requires a > 0 and x >= 0")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_cf(a, x)


# --------------------------------------------------------------------------
# Chi-square
# --------------------------------------------------------------------------

def chisq_survival(x: float, dof: int) -> float:
    """P[chi2_dof > x] for the central chi-square law."""
    dof = _check_dof(dof)
    if x <= 0.0:
        return 1.0
    return _gamma_q(0.5 * dof, 0.5 * x)


def _log_chisq_survival(x: float, dof: int) -> float:
    s = chisq_survival(x, dof)
    return math.log(s) if s > 0.0 else -math.inf


def _log_chisq_pdf(x: float, dof: int) -> float:
    half = 0.5 * x
    return _log_gamma_prefactor(0.5 * dof, half) - math.log(2.0 * half)


def _wilson_hilferty(delta: float, dof: int) -> float:
    z = gaussian_upper_quantile(delta)
    c = 2.0 / (9.0 * dof)
    cube = 1.0 - c + z * math.sqrt(c)
    if cube <= 0.0:
        return 0.5 / dof
    return dof * cube ** 3


def _chisq_newton_step(x: float, dof: int, log_delta: float) -> float:
    f = _log_chisq_survival(x, dof) - log_delta
    if f == 0.0:
        return x
    slope = -math.exp(_log_chisq_pdf(x, dof) - _log_chisq_survival(x, dof))
    if slope == 0.0:  # hazard underflows deep in the lower tail
        return math.inf
    return x - f / slope


def chisq_upper_quantile(delta: float, dof: int) -> float:
    """x such that P[chi2_dof > x] = delta, to better than 1e-8 relative.

    Very large dof (> 1e7) uses the Wilson-Hilferty cube-root start refined
    by two Newton steps, good to ~1e-6 relative, instead of the fully
    safeguarded search.
    """
    delta = _check_delta(delta)
    dof = _check_dof(dof)
    log_delta = math.log(delta)
    x = _wilson_hilferty(delta, dof)
    if dof > WILSON_HILFERTY_DOF:
        x = _chisq_newton_step(x, dof, log_delta)
        return _chisq_newton_step(x, dof, log_delta)

    # bracket the root: survival decreases in x
    lo, hi = x, x
    while _log_chisq_survival(lo, dof) < log_delta:
        lo *= 0.5
        if lo < 1e-300:
            lo = 0.0
            break
    while _log_chisq_survival(hi, dof) > log_delta:
        hi *= 2.0
    for _ in range(200):
        f = _log_chisq_survival(x, dof) - log_delta
        if f == 0.0:
            return x
        if f > 0.0:
            lo = x
        else:
            hi = x
        x_new = _chisq_newton_step(x, dof, log_delta)
        if x_new == x:
            return x
        if not math.isfinite(x_new) or not lo <= x_new <= hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < 1e-12 * max(x, 1e-300):
            return x_new
        x = x_new
    return x


def chisq_quantile_bound(delta: float, dof: int) -> float:
    """Closed-form dominating bound 2*dof + 3*ln(1/delta) on the upper quantile."""
    delta = _check_delta(delta)
    dof = _check_dof(dof)
    return 2.0 * dof + 3.0 * math.log(1.0 / delta)


def birge_tail_check(dof: int, x: float) -> BirgeTailCheck:
    """Evaluate both sides of the chi-square deviation inequality.

    The tail P[chi2_dof >= dof + 2 sqrt(dof x) + 2x] must not exceed e^-x;
    only the central case is handled.
    """
    dof = _check_dof(dof)
    x = float(x)
    if x <= 0.0:
        raise ValueError(f"x must be positive, got {x}")
    threshold = dof + 2.0 * math.sqrt(dof * x) + 2.0 * x
    return BirgeTailCheck(bound_prob=math.exp(-x), tail_prob=chisq_survival(threshold, dof))
