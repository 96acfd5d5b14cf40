"""Mild-solution formulas and residual verification for linear impulsive
fractional evolution equations of Caputo order 0 < alpha < 1.

The package evaluates three candidate piecewise formulas for the mild
solution of

    D^alpha x(t) = A x(t) + f(t),   x(0) = x0,
    x(t_k^+) - x(t_k^-) = I_k(x(t_k^-)),

and decides by grid-refinement evidence which of them satisfies the
equation away from the impulse times.  The restart and shifted variants
fail beyond the first impulse; the pullback variant, whose impulse terms
compose the solution family with its inverse at the impulse time, is the
one that verifies.
"""

__version__ = "0.1.0"

from .caputo import (
    Convention,
    caputo_l1,
    caputo_piecewise,
    caputo_quad,
    kernel_moments,
)
from .errors import (
    CheckFailed,
    CheckUnknown,
    ConfigInvalid,
    DataMalformed,
    FracimpulseError,
    MissingPieceFormula,
    NonConvergent,
    NonUniformGrid,
    NotConverged,
    NumericallySingular,
    PoleProximity,
    SeriesDivergence,
    SingularTime,
    ToleranceNotMet,
)
from .mlf import (
    MLArgs,
    SERIES_RADIUS,
    contour_params_for,
    cpow,
    cpow_grid,
    gamma_real,
    ml_deriv_grid,
    ml_grid,
    mlf,
    mlf_contour,
    mlf_deriv,
    mlf_series,
)
from .resolvent import (
    OperatorSpec,
    s_alpha,
    s_alpha_inverse,
    t_alpha,
)
from .solutions import (
    AffineImpulse,
    CallbackForcing,
    CallbackImpulse,
    ConstantJump,
    ImpulsiveProblem,
    PolynomialForcing,
    StateForcing,
    Trajectory,
    convolve_t_alpha,
    eval_pullback_solution,
    eval_restart_solution,
    eval_shifted_solution,
    solve_picard,
)
from .verifier import (
    CandidateComparison,
    DefectValue,
    GapReport,
    ResidualReport,
    Verdict,
    check_generator_identities,
    check_origin_mismatch,
    check_piecewise_restart_residual,
    check_shifted_origin_identity,
    residual_at_times,
    residual_report,
    restart_formula_defect,
    shifted_impulse_defect,
    shifted_state_identity_gap,
    verify_candidate_formulas,
)

__all__ = [
    "__version__",
    "Convention",
    "caputo_l1",
    "caputo_piecewise",
    "caputo_quad",
    "kernel_moments",
    "CheckFailed",
    "CheckUnknown",
    "ConfigInvalid",
    "DataMalformed",
    "FracimpulseError",
    "MissingPieceFormula",
    "NonConvergent",
    "NonUniformGrid",
    "NotConverged",
    "NumericallySingular",
    "PoleProximity",
    "SeriesDivergence",
    "SingularTime",
    "ToleranceNotMet",
    "MLArgs",
    "SERIES_RADIUS",
    "contour_params_for",
    "cpow",
    "cpow_grid",
    "gamma_real",
    "ml_deriv_grid",
    "ml_grid",
    "mlf",
    "mlf_contour",
    "mlf_deriv",
    "mlf_series",
    "OperatorSpec",
    "s_alpha",
    "s_alpha_inverse",
    "t_alpha",
    "AffineImpulse",
    "CallbackForcing",
    "CallbackImpulse",
    "ConstantJump",
    "ImpulsiveProblem",
    "PolynomialForcing",
    "StateForcing",
    "Trajectory",
    "convolve_t_alpha",
    "eval_pullback_solution",
    "eval_restart_solution",
    "eval_shifted_solution",
    "solve_picard",
    "CandidateComparison",
    "DefectValue",
    "GapReport",
    "ResidualReport",
    "Verdict",
    "check_generator_identities",
    "check_origin_mismatch",
    "check_piecewise_restart_residual",
    "check_shifted_origin_identity",
    "residual_at_times",
    "residual_report",
    "restart_formula_defect",
    "shifted_impulse_defect",
    "shifted_state_identity_gap",
    "verify_candidate_formulas",
]
