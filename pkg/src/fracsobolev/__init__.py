"""Numerical laboratory for sharp fractional Sobolev constants on the ball.

Piecewise-linear finite elements on the unit ball (dimensions 1 and 2),
an exactly-integrated nonlocal quadratic form, a safeguarded Rayleigh
quotient minimizer, and rate experiments measuring how fast the discrete
constant approaches the sharp one under mesh refinement.
"""

from .bubble import (
    Bubble,
    TruncatedBubble,
    bubble_lq_norm,
    normalize_lambda,
    truncated_bubble,
)
from .experiments import (
    InterpRates,
    RateFit,
    SweepRecord,
    SweepResult,
    discrete_constant_sweep,
    fit_rate,
    make_rng,
    read_records,
    upper_bound_sweep,
    verify_covering,
    verify_functional_inequalities,
    verify_interp_error,
    verify_minimizing_sequence,
    write_records,
)
from .gagliardo import (
    AssemblyError,
    AssemblyReport,
    NonlocalForm,
    QuadSpec,
    assemble,
    complement_weight,
    dump_matrix,
    seminorm_sq,
    seminorm_sq_direct,
)
from .mesh import (
    BallMesh,
    FeFunction,
    build_mesh,
    element_geometry,
    export_text,
    interpolate,
    make_ball_mesh,
    mesh_quality,
)
from .norms import QuadratureRule, lq_norm, nonlinear_residual, reference_rule
from .params import (
    ProblemParams,
    check_order,
    cosine_kernel_integral,
    critical_exponent,
    exact_constant,
    optimal_concentration,
    problem_params,
    rate_exponent,
)
from .solver import ManifoldFit, SolverReport, deficit, fit_manifold, quotient, solve

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "AssemblyReport",
    "BallMesh",
    "Bubble",
    "FeFunction",
    "InterpRates",
    "ManifoldFit",
    "NonlocalForm",
    "ProblemParams",
    "QuadSpec",
    "QuadratureRule",
    "RateFit",
    "SolverReport",
    "SweepRecord",
    "SweepResult",
    "TruncatedBubble",
    "assemble",
    "bubble_lq_norm",
    "build_mesh",
    "check_order",
    "complement_weight",
    "cosine_kernel_integral",
    "critical_exponent",
    "deficit",
    "discrete_constant_sweep",
    "dump_matrix",
    "element_geometry",
    "exact_constant",
    "export_text",
    "fit_manifold",
    "fit_rate",
    "interpolate",
    "lq_norm",
    "make_ball_mesh",
    "make_rng",
    "mesh_quality",
    "nonlinear_residual",
    "normalize_lambda",
    "optimal_concentration",
    "problem_params",
    "quotient",
    "rate_exponent",
    "read_records",
    "reference_rule",
    "seminorm_sq",
    "seminorm_sq_direct",
    "solve",
    "truncated_bubble",
    "upper_bound_sweep",
    "verify_covering",
    "verify_functional_inequalities",
    "verify_interp_error",
    "verify_minimizing_sequence",
    "write_records",
]
