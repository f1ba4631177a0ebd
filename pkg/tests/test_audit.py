"""Audit machinery tests.

The independent oracles: direct Gaussian density quotients for the unmasked
log ratio, brute-force trapezoid quadrature for the sphere-average integral,
and plain Monte Carlo for the violation probabilities.  Nested-MC runs here
use reduced sample counts; the full-scale runs live in the acceptance suite.
"""

import json
import math

import numpy as np
import pytest

from dpmask.audit import (
    AuditReport,
    AuditScaleError,
    VERDICT_CONSISTENT,
    VERDICT_VIOLATED,
    birge_suite,
    density_ratio_bound_check_BC,
    g_function,
    g_ratio_bound_check,
    log_density_ratio_A,
    log_g_function,
    quantile_bracket_suite,
    sphere_integral_check,
    violation_probability_A_analytic,
    violation_probability_MC,
)
from dpmask.calibration import PrivacyBudget, ProblemShape, sigma_joint_BC, sigma_necessary_A, sigma_sufficient_A
from dpmask.mechanisms import DataMatrix, make_neighbor


def _pair(n=4, p=1, base_value=1.0):
    """Neighbors differing in row 0 by the unit vector e1."""
    base = np.full((n, p), base_value)
    base[0] = 0.0
    delta = np.zeros(p)
    delta[0] = 1.0
    return make_neighbor(DataMatrix(base), 0, delta)


# ---------------------------------------------------------------------------
# unmasked log density ratio
# ---------------------------------------------------------------------------

def oracle_log_ratio(y, pair, sigma):
    # definition: log N(y; X, sigma^2 I) - log N(y; X', sigma^2 I)
    x, xp = pair.base.values, pair.variant.values
    return (np.sum((y - xp) ** 2) - np.sum((y - x) ** 2)) / (2.0 * sigma**2)


def test_log_ratio_univariate_example():
    pair = make_neighbor(DataMatrix(np.zeros((1, 1))), 0, [1.0])
    assert log_density_ratio_A(np.zeros((1, 1)), pair, 1.0) == pytest.approx(0.5)


def test_log_ratio_zero_for_identical_neighbors():
    pair = make_neighbor(_pair(3, 2).base, 0, np.zeros(2))
    rng = np.random.default_rng(0)
    for _ in range(5):
        y = rng.standard_normal((3, 2))
        assert log_density_ratio_A(y, pair, 2.0) == 0.0


def test_log_ratio_midpoint_symmetry():
    pair = _pair(4, 3)
    y = pair.base.values.copy()
    y[0] = pair.base.values[0] + pair.delta / 2.0
    assert log_density_ratio_A(y, pair, 1.7) == pytest.approx(0.0, abs=1e-12)


def test_log_ratio_matches_density_quotient_oracle():
    rng = np.random.default_rng(1)
    for n, p, sigma in [(2, 1, 0.5), (5, 3, 2.0), (8, 2, 11.0)]:
        base = DataMatrix(rng.uniform(-0.5, 0.5, (n, p)))
        delta = rng.uniform(-0.3, 0.3, p)
        pair = make_neighbor(base, rng.integers(0, n), delta)
        for _ in range(5):
            y = rng.standard_normal((n, p)) * 3.0
            assert log_density_ratio_A(y, pair, sigma) == pytest.approx(
                oracle_log_ratio(y, pair, sigma), rel=1e-10, abs=1e-12
            )


def test_log_ratio_antisymmetry():
    pair = _pair(5, 2)
    reversed_pair = make_neighbor(pair.variant, pair.row_index, -pair.delta)
    rng = np.random.default_rng(2)
    for _ in range(10):
        y = rng.standard_normal((5, 2))
        assert log_density_ratio_A(y, pair, 1.3) == pytest.approx(
            -log_density_ratio_A(y, reversed_pair, 1.3), rel=1e-12, abs=1e-12
        )


# ---------------------------------------------------------------------------
# violation probabilities, setting A
# ---------------------------------------------------------------------------

def test_analytic_violation_at_calibrated_scales():
    eps, delta = 0.4, 0.02
    budget = PrivacyBudget(eps, delta)
    pair = _pair()
    assert violation_probability_A_analytic(pair, sigma_sufficient_A(budget), eps) <= delta
    assert (
        violation_probability_A_analytic(pair, sigma_necessary_A(budget) - 1e-6, eps) > delta
    )


def test_analytic_violation_zero_for_identical():
    pair = make_neighbor(DataMatrix(np.zeros((2, 2))), 0, [0.0, 0.0])
    assert violation_probability_A_analytic(pair, 1.0, 0.5) == 0.0


def test_mc_violation_A_matches_analytic():
    pair = _pair(6, 2)
    for sigma, eps, seed in [(1.0, 0.3, 1), (3.0, 0.5, 2), (8.0, 0.1, 3)]:
        report = violation_probability_MC(pair, "A", sigma, eps, samples=100_000, seed=seed)
        assert report.verdict == VERDICT_CONSISTENT
        assert report.analytic_reference == pytest.approx(
            violation_probability_A_analytic(pair, sigma, eps)
        )
        se = max(report.std_error, 1e-4)
        assert abs(report.estimate - report.analytic_reference) <= 3.0 * se


def test_mc_violation_A_huge_epsilon_is_zero():
    report = violation_probability_MC(_pair(), "A", 2.0, 50.0, samples=50_000, seed=4)
    assert report.estimate == 0.0
    assert report.verdict == VERDICT_CONSISTENT


# ---------------------------------------------------------------------------
# violation probabilities, settings B/C
# ---------------------------------------------------------------------------

def test_mc_violation_BC_within_calibrated_bound():
    eps, delta = 0.5, 0.05
    sigma, _ = sigma_joint_BC(PrivacyBudget(eps, delta), ProblemShape(4, 1))
    report = violation_probability_MC(
        _pair(4, 1), "B", sigma, eps, samples=40, seed=5, inner_samples=20_000, delta=delta
    )
    assert report.verdict == VERDICT_CONSISTENT
    assert report.estimate - 3.0 * report.std_error <= delta
    assert report.bound_reference == delta


def test_mc_violation_BC_n6_freshly_calibrated():
    eps, delta = 0.8, 0.1
    sigma, _ = sigma_joint_BC(PrivacyBudget(eps, delta), ProblemShape(6, 1))
    report = violation_probability_MC(
        _pair(6, 1), "B", sigma, eps, samples=30, seed=12, inner_samples=20_000, delta=delta
    )
    assert report.estimate - 3.0 * report.std_error <= delta


def test_mc_violation_BC_settings_share_estimator():
    report = violation_probability_MC(
        _pair(4, 1), "C", 2.5, 50.0, samples=10, seed=6, inner_samples=5_000
    )
    assert report.estimate == 0.0


def test_mc_violation_scale_refusal():
    with pytest.raises(AuditScaleError, match="n <= 8"):
        violation_probability_MC(_pair(12, 1), "B", 2.0, 0.5, samples=5, seed=0)


# ---------------------------------------------------------------------------
# G function
# ---------------------------------------------------------------------------

def oracle_g_trapezoid(q, t, points=1_000_001):
    u = np.linspace(-1.0, 1.0, points)
    vals = np.exp(t * u) * (1.0 - u * u) ** ((q - 2) / 2.0)
    return float(np.trapezoid(vals, u))


def test_g_closed_forms_at_zero():
    assert g_function(2, 0.0) == pytest.approx(2.0, rel=1e-9)
    assert g_function(4, 0.0) == pytest.approx(4.0 / 3.0, rel=1e-9)


def test_g_against_trapezoid_oracle():
    assert g_function(3, 2.0) == pytest.approx(oracle_g_trapezoid(3, 2.0), rel=1e-7)
    assert g_function(5, 7.0) == pytest.approx(oracle_g_trapezoid(5, 7.0), rel=1e-7)


def test_g_even_in_t():
    assert g_function(6, 3.0) == pytest.approx(g_function(6, -3.0), rel=1e-12)


def test_g_shifted_branch_continuity():
    # the saddle-shifted variable takes over above t = 200
    below = log_g_function(7, 199.5)
    above = log_g_function(7, 200.5)
    interp = 0.5 * (log_g_function(7, 199.0) + log_g_function(7, 201.0))
    assert above > below
    assert 0.5 * (below + above) == pytest.approx(interp, abs=1e-4)


def test_g_overflow_guard():
    assert log_g_function(2, 800.0) > 709.0
    with pytest.raises(OverflowError, match="log_g_function"):
        g_function(2, 800.0)


def test_g_monotone_and_derivative_inequality():
    for q in (2, 3, 5, 10, 50):
        ts = np.linspace(0.5, 50.0, 25)
        vals = [log_g_function(q, t) for t in ts]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        for t in (0.7, 6.0, 31.0):
            h = 1e-5 * max(1.0, t)
            g0 = g_function(q, t)
            d = (g_function(q, t + h) - g_function(q, t - h)) / (2.0 * h)
            assert 0.0 < d < (t / q) * g0


def test_g_ratio_bound_examples():
    report = g_ratio_bound_check(5, 1.0, 3.0)
    assert report.verdict == VERDICT_CONSISTENT
    assert report.estimate <= math.exp(8.0 / 10.0)
    assert report.bound_reference == pytest.approx(math.exp(0.8))

    report = g_ratio_bound_check(4, 2.0, 2.0)
    assert report.estimate == pytest.approx(1.0)
    assert report.verdict == VERDICT_CONSISTENT

    report = g_ratio_bound_check(2, 0.1, 10.0)
    assert report.verdict == VERDICT_CONSISTENT


def test_g_ratio_rejects_nonpositive():
    with pytest.raises(ValueError):
        g_ratio_bound_check(3, 0.0, 1.0)


# ---------------------------------------------------------------------------
# sphere integral
# ---------------------------------------------------------------------------

def test_sphere_full_space_q3_closed_form():
    report = sphere_integral_check(3, 3, [2.0, 0.0, 0.0], subspace_seed=5)
    assert report.analytic_reference == pytest.approx(math.sinh(2.0) / 2.0, rel=1e-9)
    assert report.verdict == VERDICT_CONSISTENT


def test_sphere_zero_vector_trivial():
    report = sphere_integral_check(6, 3, np.zeros(6), subspace_seed=1)
    assert report.estimate == pytest.approx(1.0)
    assert report.analytic_reference == pytest.approx(1.0)
    assert report.verdict == VERDICT_CONSISTENT


def test_sphere_orthogonal_vector_trivial():
    # rebuild the frame drawn by the check to construct v in its orthogonal
    # complement: both sides must then equal 1 exactly
    n, q, seed = 8, 3, 42
    rng = np.random.Generator(np.random.PCG64(seed))
    frame, r = np.linalg.qr(rng.standard_normal((n, q)))
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    frame = frame * signs
    raw = np.arange(1.0, n + 1.0)
    v = raw - frame @ (frame.T @ raw)
    report = sphere_integral_check(n, q, v, subspace_seed=seed)
    assert report.analytic_reference == pytest.approx(1.0, abs=1e-10)
    assert report.estimate == pytest.approx(1.0, abs=1e-10)


def test_sphere_random_config():
    rng = np.random.default_rng(9)
    v = rng.normal(scale=1.5, size=8)
    report = sphere_integral_check(8, 4, v, subspace_seed=11)
    assert report.verdict == VERDICT_CONSISTENT
    assert abs(report.estimate - report.analytic_reference) <= 3.0 * report.std_error


def test_sphere_domain_errors():
    with pytest.raises(ValueError, match="ambient"):
        sphere_integral_check(3, 4, np.zeros(3), subspace_seed=0)
    with pytest.raises(ValueError):
        sphere_integral_check(40, 4, np.zeros(40), subspace_seed=0)
    with pytest.raises(ValueError):
        sphere_integral_check(4, 1, np.zeros(4), subspace_seed=0)


# ---------------------------------------------------------------------------
# masked density-ratio bound
# ---------------------------------------------------------------------------

def test_ratio_bound_identical_neighbors():
    base = DataMatrix(np.full((4, 1), 0.5))
    pair = make_neighbor(base, 0, [0.0])
    report = density_ratio_bound_check_BC(pair, sigma=2.0, samples=10, seed=7, inner_samples=5_000)
    assert report.verdict == VERDICT_CONSISTENT
    assert report.estimate < 0.0  # log ratio ~ 0, bound strictly positive


def test_ratio_bound_worst_case_pair():
    report = density_ratio_bound_check_BC(
        _pair(4, 1), sigma=4.0, samples=30, seed=8, inner_samples=20_000
    )
    assert report.verdict == VERDICT_CONSISTENT
    assert report.estimate - 3.0 * report.std_error <= 0.0
    assert report.bound_reference == 0.0


def test_ratio_bound_scale_refusal():
    with pytest.raises(AuditScaleError):
        density_ratio_bound_check_BC(_pair(7, 1), sigma=2.0, samples=5, seed=0)


# ---------------------------------------------------------------------------
# closed-form suites and report plumbing
# ---------------------------------------------------------------------------

def test_quantile_bracket_suite_passes_on_dyadic_grid():
    report = quantile_bracket_suite()
    assert report.verdict == VERDICT_CONSISTENT
    assert report.estimate == 1.0


def test_quantile_bracket_suite_detects_invalid_region():
    # the bracket genuinely fails above the ~0.0314 crossover
    report = quantile_bracket_suite(deltas=[0.01, 0.04])
    assert report.verdict == VERDICT_VIOLATED
    assert report.estimate == 0.5


def test_birge_suite_passes():
    report = birge_suite()
    assert report.verdict == VERDICT_CONSISTENT
    assert report.samples == 20


def test_report_json_contract():
    report = AuditReport(
        estimate=0.25, std_error=0.01, samples=100, verdict=VERDICT_CONSISTENT,
        analytic_reference=0.26, bound_reference=None,
    )
    payload = json.loads(report.to_json())
    assert set(payload) == {
        "estimate", "std_error", "analytic_reference", "bound_reference", "samples", "verdict",
    }
