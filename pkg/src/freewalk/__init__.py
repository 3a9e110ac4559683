"""Random walks on free products of lattices: return probabilities, the
spectral trichotomy at the radius of convergence and singular laws at the
critical mixing weight."""

from .errors import FreewalkError, NumericalError, ValidationError
from .freeprod import (
    DEGENERATE_CONVERGENT,
    DEGENERATE_DIVERGENT,
    NON_DEGENERATE_DIVERGENT,
    FreeProductConfig,
    classify,
    find_alpha_star,
    green_freeprod,
    make_config,
    moments_I_J,
    zeta,
)
from .lattice import FactorMeasure, green_eval, lazy_srw, srw, theta_of_factor, validate_factor
from .provenance import TOOL_VERSION as __version__
from .series import bfs_oracle, green_series_freeprod, monte_carlo, qn_sequence
from .singularity import (
    build_profile,
    check_ratio_laws,
    check_second_order_chain,
    fit_green_singularity,
    tauberian_fit,
)

__all__ = [
    "DEGENERATE_CONVERGENT",
    "DEGENERATE_DIVERGENT",
    "NON_DEGENERATE_DIVERGENT",
    "FactorMeasure",
    "FreeProductConfig",
    "FreewalkError",
    "NumericalError",
    "ValidationError",
    "bfs_oracle",
    "build_profile",
    "check_ratio_laws",
    "check_second_order_chain",
    "classify",
    "find_alpha_star",
    "fit_green_singularity",
    "green_eval",
    "green_freeprod",
    "green_series_freeprod",
    "lazy_srw",
    "make_config",
    "moments_I_J",
    "monte_carlo",
    "qn_sequence",
    "srw",
    "tauberian_fit",
    "theta_of_factor",
    "validate_factor",
    "zeta",
]
