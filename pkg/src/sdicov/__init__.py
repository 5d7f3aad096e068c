"""Steepest descent with iterated change of variables (SDICOV).

Rank-one change-of-basis transforms, a bisection line search, SDICOV with
four comparator optimizers, a quadratic verification lab, test problems
and a benchmark CLI.
"""

from .errors import (
    BreakdownError,
    ConfigError,
    DimensionMismatch,
    NearSingular,
    NonPositiveCurvature,
    NotPositiveDefinite,
    SdicovError,
    ZeroDirection,
)
from .linesearch import (
    ExactQuadraticSearch,
    LineSearchResult,
    LineSearchSpec,
    LineSearchStatus,
    bisection_search,
    exact_quadratic_alpha,
)
from .optimizers import (
    OPTIMIZERS,
    FunctionOracle,
    IterationRecord,
    RunReport,
    RunStatus,
    TerminationPolicy,
    bfgs_minimize,
    cg_fr_minimize,
    cg_pr_minimize,
    dfp_minimize,
    sdicov_minimize,
)
from .problems import (
    DistanceGeometryInstance,
    Rosenbrock,
    generate_distg,
    initial_point,
    read_instance,
    standard_suite,
    write_instance,
)
from .quadlab import QuadraticObjective, random_quadratic, random_spd
from .transforms import (
    RankOneTransform,
    TransformChain,
    apply,
    apply_adjoint,
    apply_inverse,
    chain_adjoint,
    chain_forward,
    chain_inverse,
    h_apply,
    make_transform,
)

__version__ = "0.1.0"

__all__ = [
    "QuadraticObjective",
    "random_quadratic",
    "random_spd",
    "BreakdownError",
    "ConfigError",
    "DimensionMismatch",
    "NearSingular",
    "NonPositiveCurvature",
    "NotPositiveDefinite",
    "SdicovError",
    "ZeroDirection",
    "ExactQuadraticSearch",
    "LineSearchResult",
    "LineSearchSpec",
    "LineSearchStatus",
    "bisection_search",
    "exact_quadratic_alpha",
    "OPTIMIZERS",
    "FunctionOracle",
    "IterationRecord",
    "RunReport",
    "RunStatus",
    "TerminationPolicy",
    "bfgs_minimize",
    "cg_fr_minimize",
    "cg_pr_minimize",
    "dfp_minimize",
    "sdicov_minimize",
    "DistanceGeometryInstance",
    "Rosenbrock",
    "generate_distg",
    "initial_point",
    "read_instance",
    "standard_suite",
    "write_instance",
    "RankOneTransform",
    "TransformChain",
    "apply",
    "apply_adjoint",
    "apply_inverse",
    "chain_adjoint",
    "chain_forward",
    "chain_inverse",
    "h_apply",
    "make_transform",
]
