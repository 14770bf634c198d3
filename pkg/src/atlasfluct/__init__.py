"""Fluctuation statistics of the Atlas model of rank-based Brownian particles."""

__version__ = "0.1.0"

from .errors import (AtlasError, ParameterError, RejectedInputError, SaturationError,  # noqa: E402
                     IntegrationError, QuadratureError, GridError, CholeskyError,
                     StatisticsError)
from .rng import RngSpec  # noqa: E402
from .model import (ModelParams, ParticleConfig, SimPath, rank_positions, tilde_center,  # noqa: E402
                    eps_center, y_view)
from .samplers import (ProfileKind, ProfileSpec, sample_nu, sample_tilde_nu,  # noqa: E402
                       sample_homogeneous, sample_gamma_variate)
from .dynamics import (simulate_paths, euler_step, gap_series, PathEnsemble,  # noqa: E402
                       IntegratorReport)
from .kernels import KernelEval, heat_kernel, q_kernel, hatq_kernel, psi  # noqa: E402
from .limit_field import (LimitCovariance, LowestLimit, lowest_limit, cov_G, cov_W, cov_M,  # noqa: E402
                          var_u, sample_limit_G, fbm_quarter_cov, h_transform)
from .estimators import (FieldGrid, count_field, ranked_field, chi_triple,  # noqa: E402
                         g_path_estimator, empirical_cov, structure_exponent, lowest_statistic)
from .stats import KSResult, ks_test, chi_square_poisson, batch_mean_ci  # noqa: E402

__all__ = [
    "__version__",
    "AtlasError",
    "ParameterError",
    "RejectedInputError",
    "SaturationError",
    "IntegrationError",
    "QuadratureError",
    "GridError",
    "CholeskyError",
    "StatisticsError",
    "RngSpec",
    "ModelParams",
    "ParticleConfig",
    "SimPath",
    "rank_positions",
    "tilde_center",
    "eps_center",
    "y_view",
    "ProfileKind",
    "ProfileSpec",
    "sample_nu",
    "sample_tilde_nu",
    "sample_homogeneous",
    "sample_gamma_variate",
    "simulate_paths",
    "euler_step",
    "gap_series",
    "PathEnsemble",
    "IntegratorReport",
    "KernelEval",
    "heat_kernel",
    "q_kernel",
    "hatq_kernel",
    "psi",
    "LimitCovariance",
    "LowestLimit",
    "lowest_limit",
    "cov_G",
    "cov_W",
    "cov_M",
    "var_u",
    "sample_limit_G",
    "fbm_quarter_cov",
    "h_transform",
    "FieldGrid",
    "count_field",
    "ranked_field",
    "chi_triple",
    "g_path_estimator",
    "empirical_cov",
    "structure_exponent",
    "lowest_statistic",
    "KSResult",
    "ks_test",
    "chi_square_poisson",
    "batch_mean_ci",
]
