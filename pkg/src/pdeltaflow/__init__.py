"""Numerical laboratory for stationary shear-thinning flow with
inhomogeneous divergence and boundary data.

The pipeline follows the constructive skeleton of the existence theory
for power-law (p-delta) fluids: lift the data into a discrete velocity
field, estimate every constant entering the coercivity condition, test
the smallness inequality for an explicit radius, solve the regularized
Galerkin systems along a penalty continuation, and exhibit the failure
of any such radius under low data regularity.
"""

from .constitutive import (
    Characteristics,
    PDeltaModel,
    estimate_characteristics,
    eval_stress,
    inequality_sweep,
    rho_lower_bound,
    shifted_stress,
    young_gap,
)
from .certifier import (
    AlternativeBound,
    CoercivityReport,
    alternative_bound_scan,
    check_smallness,
    compute_constants,
    compute_s,
    polynomial_positivity_check,
    scaling_sweep,
    weight_optimality_scan,
)
from .counterexample import (
    TwoNormFamily,
    build_family,
    construct_u_n,
    counterexample_scan,
    evaluate_P_n,
    find_y_n,
)
from .discretization import (
    DiscreteSpace,
    EmbeddingConstants,
    Field,
    RectDomain,
    build_space,
    discrete_divergence,
    estimate_embedding_constants,
    estimate_korn,
    estimate_sobolev,
    norm_Lp,
    norm_sym_grad_p,
)
from .lifting import BoundaryData, LiftField, check_compatibility, lift, operator_norm_probe
from .solver import (
    ProblemInstance,
    SolveResult,
    SolverConfig,
    apply_P,
    apply_S,
    apply_T,
    continuation_solve,
    convective_identity_diagnostics,
    default_config,
    make_instance,
    recover_pressure,
    solve_regularized,
)

__version__ = "0.1.0"

__all__ = [
    "PDeltaModel",
    "Characteristics",
    "eval_stress",
    "shifted_stress",
    "estimate_characteristics",
    "inequality_sweep",
    "young_gap",
    "rho_lower_bound",
    "RectDomain",
    "DiscreteSpace",
    "Field",
    "EmbeddingConstants",
    "build_space",
    "norm_Lp",
    "norm_sym_grad_p",
    "discrete_divergence",
    "estimate_korn",
    "estimate_sobolev",
    "estimate_embedding_constants",
    "BoundaryData",
    "LiftField",
    "check_compatibility",
    "lift",
    "operator_norm_probe",
    "CoercivityReport",
    "AlternativeBound",
    "compute_s",
    "compute_constants",
    "check_smallness",
    "polynomial_positivity_check",
    "weight_optimality_scan",
    "alternative_bound_scan",
    "scaling_sweep",
    "ProblemInstance",
    "SolverConfig",
    "SolveResult",
    "make_instance",
    "default_config",
    "apply_S",
    "apply_T",
    "apply_P",
    "solve_regularized",
    "continuation_solve",
    "recover_pressure",
    "convective_identity_diagnostics",
    "TwoNormFamily",
    "build_family",
    "find_y_n",
    "construct_u_n",
    "evaluate_P_n",
    "counterexample_scan",
]
