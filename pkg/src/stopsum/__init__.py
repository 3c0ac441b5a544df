"""Tail asymptotics of randomly stopped sums.

Lattice convolution with certified remainder buckets, a constructive concave
weight for heavy-tailed laws, exponential change of measure, application
pipelines (random-walk supremum, compound Poisson, infinitely divisible laws,
subcritical branching), and Monte Carlo cross-checks.
"""

from ._backend import NUMBA_ENABLED
from ._logdomain import NumericError
from .applications import (
    BranchingMeanCurve,
    GeometricCompoundSpec,
    InfdivResult,
    LevySpec,
    SubexpDiagnostic,
    SupremumRatioCurve,
    branching_mean,
    compound_poisson,
    compound_poisson_curve,
    infdiv_compose,
    ladder_from_integrated_tail,
    long_tail_curve,
    subexp_diagnostic,
    supremum_from_ladder,
    supremum_ratio_curve,
)
from .concave import (
    ConcavePiecewiseLinear,
    block_residuals,
    build_concave_weight,
    divergence_witness,
    exp_moment_of_sum,
    stopping_moment_condition,
)
from .convolve import (
    LiminfEstimate,
    TailRatioCurve,
    conv,
    conv_power,
    conv_tail_lower_bound,
    default_x_grid,
    liminf_estimate,
    stopped_sum,
    tail_ratio_curve,
)
from .dists import (
    CountingDist,
    IntegratedTailDist,
    MgfProfile,
    ParametricDist,
    classify_tail,
    fractional_exp_moment_diverges,
)
from .lattice import LatticeDist, discretize
from .simulate import (
    EmpiricalTail,
    McEstimate,
    SupremumSimulation,
    sample_stopped_sum,
    simulate_supremum,
    tilted_tail_estimate,
)
from .tilt import (
    TiltedPair,
    compound_poisson_limit_constant,
    stopped_tail_limit_constant,
    tilt,
    tilt_identity_check,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "NumericError",
    "BranchingMeanCurve",
    "GeometricCompoundSpec",
    "InfdivResult",
    "LevySpec",
    "SubexpDiagnostic",
    "SupremumRatioCurve",
    "branching_mean",
    "compound_poisson",
    "compound_poisson_curve",
    "infdiv_compose",
    "ladder_from_integrated_tail",
    "long_tail_curve",
    "subexp_diagnostic",
    "supremum_from_ladder",
    "supremum_ratio_curve",
    "ConcavePiecewiseLinear",
    "block_residuals",
    "build_concave_weight",
    "divergence_witness",
    "exp_moment_of_sum",
    "stopping_moment_condition",
    "LiminfEstimate",
    "TailRatioCurve",
    "conv",
    "conv_power",
    "conv_tail_lower_bound",
    "default_x_grid",
    "liminf_estimate",
    "stopped_sum",
    "tail_ratio_curve",
    "CountingDist",
    "IntegratedTailDist",
    "MgfProfile",
    "ParametricDist",
    "classify_tail",
    "fractional_exp_moment_diverges",
    "LatticeDist",
    "discretize",
    "EmpiricalTail",
    "McEstimate",
    "SupremumSimulation",
    "sample_stopped_sum",
    "simulate_supremum",
    "tilted_tail_estimate",
    "TiltedPair",
    "compound_poisson_limit_constant",
    "stopped_tail_limit_constant",
    "tilt",
    "tilt_identity_check",
    "__version__",
]
