"""Exact and inexact semi-smooth Newton solvers for absolute value equations."""

from .core import (
    AveProblem,
    SignVector,
    load_problem,
    newton_operator_apply,
    residual,
    save_problem,
    sign_of,
)
from .linalg import CsrMatrix, lsqr
from .solver import (
    SolverConfig,
    SolveReport,
    Status,
    contraction_factor,
    exact_newton,
    inexact_newton,
    solve,
    theta_bound_global,
    theta_bound_signwise,
    verify_hypotheses,
)

__all__ = [
    "AveProblem",
    "CsrMatrix",
    "SignVector",
    "SolveReport",
    "SolverConfig",
    "Status",
    "contraction_factor",
    "exact_newton",
    "inexact_newton",
    "load_problem",
    "lsqr",
    "newton_operator_apply",
    "residual",
    "save_problem",
    "sign_of",
    "solve",
    "theta_bound_global",
    "theta_bound_signwise",
    "verify_hypotheses",
]
