"""Pseudo-data release under (epsilon, delta)-differential privacy, with and
without random orthogonal matrix masking.

The package calibrates the Gaussian noise scale for three release settings
(noise only; noise then mask; mask then noise), executes the releases
reproducibly, and numerically audits the privacy bounds and the analytic
machinery behind them at desk scale.
"""

from ._kernel import BACKEND as KERNEL_BACKEND
from .audit import (
    AuditReport,
    AuditScaleError,
    density_ratio_bound_check_BC,
    g_function,
    g_ratio_bound_check,
    log_density_ratio_A,
    log_g_function,
    sphere_integral_check,
    violation_probability_A_analytic,
    violation_probability_MC,
)
from .calibration import (
    CalibrationReport,
    PrivacyBudget,
    ProblemShape,
    RegimeError,
    calibrate,
    sigma_cor3_BC,
    sigma_cor4_BC,
    sigma_joint_BC,
    sigma_necessary_A,
    sigma_sufficient_A,
    sigma_sufficient_A_simple,
    sigma_thm2_BC,
    table1,
    table1_csv,
)
from .ingest import ScalingRecord, ingest_csv, scale_columns
from .mechanisms import (
    DataMatrix,
    NeighborPair,
    OrthogonalMatrix,
    ReleaseArtifact,
    make_neighbor,
    release,
    release_components,
    sample_haar_orthogonal,
    sample_noise,
)
from .quantiles import (
    QuantileBracket,
    birge_tail_check,
    chisq_quantile_bound,
    chisq_upper_quantile,
    gaussian_quantile_bracket,
    gaussian_upper_quantile,
)

__version__ = "0.1.0"
