"""Exact and inexact semi-smooth Newton iterations for ``A x - |x| = b``.

Each step linearizes with ``A - D(x_k)``, ``D(x) = diag(sgn(x))``. The exact
variant solves ``(A - D(x_k)) x_{k+1} = b`` by dense LU; the inexact variant
accepts any ``x_{k+1}`` with

    ||(A - D(x_k)) x_{k+1} - b||_2 <= theta * ||F(x_k)||_2

and produces one with warm-started LSQR on the matrix-free operator.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import (
    AveProblem,
    SignShiftedOperator,
    SignVector,
    newton_operator_apply,
    residual,
    shifted_dense,
    sign_of,
)
from .exceptions import (
    AveError,
    BoundNotApplicableError,
    DimensionError,
    SingularMatrixError,
)
from .linalg import (
    dense_inverse,
    dense_lu_solve,
    dense_norm,
    extreme_singular_values,
    lsqr,
    spmv,
)

_EPS = np.finfo(np.float64).eps
THETA_SAFETY = 0.9999


class Status(str, enum.Enum):
    SOLUTION_FOUND = "solution_found"
    MAX_ITER = "max_iter"
    INNER_FAILURE = "inner_failure"
    SINGULAR_SYSTEM = "singular_system"

    def __str__(self):
        return self.value


@dataclass
class SolverConfig:
    """Stopping rules and inner-solve settings.

    ``theta`` is a number in [0, 1) or ``"auto"``; auto picks 0.9999 times
    the largest value for which global Q-linear convergence is guaranteed.
    With ``theta == 0`` the inner target becomes ``zero_theta_rtol * ||F||``.
    ``rounding_guard`` sets the floor ``guard * eps * (|| |A||x| + |x| || + ||b||)``
    below which an inner residual is not requested, since the residual cannot
    be evaluated more accurately than that.
    """

    method: str = "inexact"
    theta: Union[float, str] = "auto"
    outer_tol: float = 1e-8
    max_outer: int = 50
    max_inner: Optional[int] = None
    warm_start: bool = True
    norm_kind_for_bounds: str = "two"
    zero_theta_rtol: float = 1e-14
    rounding_guard: float = 1.0
    fallback_theta: float = 0.1
    divergence_limit: float = 1e150
    keep_iterates: bool = True

    def __post_init__(self):
        if self.method not in ("exact", "inexact"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.theta != "auto":
            t = float(self.theta)
            if not 0.0 <= t < 1.0:
                raise ValueError("theta must lie in [0, 1)")
            self.theta = t
        if not self.outer_tol > 0:
            raise ValueError("outer_tol must be positive")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")
        if self.norm_kind_for_bounds not in ("one", "inf", "two"):
            raise ValueError(f"unknown norm kind {self.norm_kind_for_bounds!r}")


@dataclass
class IterationRecord:
    """State after outer step ``k`` (``k = 0`` is the starting point).

    The inner fields describe the solve that produced ``x_k`` and are
    NaN/zero for ``k = 0``.
    """

    k: int
    residual_norm: float
    inner_iterations: int = 0
    inner_residual_norm: float = math.nan
    inner_target: float = math.nan
    target_floored: bool = False
    error_to_planted: Optional[float] = None


@dataclass
class SolveReport:
    status: Status
    iterations: int
    x_final: np.ndarray
    trace: list[IterationRecord]
    theta_used: float
    method: str = "exact"
    iterates: list[np.ndarray] = field(default_factory=list)
    bound_applicable: bool = True
    notes: list[str] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status is Status.SOLUTION_FOUND

    @property
    def final_residual(self) -> float:
        return self.trace[-1].residual_norm


# ---------------------------------------------------------------------------
# bounds


def _two_norms(p: AveProblem) -> tuple[float, float]:
    """``(||A||_2, ||A^{-1}||_2)``, from metadata when both values are known."""
    if p.sv_min is not None and p.sv_max is not None:
        return p.sv_max, 1.0 / p.sv_min
    sv_max, sv_min = extreme_singular_values(p.a_matrix, seed=p.seed or 0)
    return sv_max, 1.0 / sv_min


def _norms(p: AveProblem, kind: str) -> tuple[float, float]:
    if kind == "two":
        return _two_norms(p)
    if p.n > 2000:
        raise BoundNotApplicableError("1-/inf-norm bounds need a dense inverse; n > 2000")
    a = p.a_matrix.to_dense()
    try:
        inv = dense_inverse(a)
    except SingularMatrixError as exc:
        raise BoundNotApplicableError(f"A is singular: {exc}") from None
    return dense_norm(a, kind), dense_norm(inv, kind)


def global_theta_formula(norm_a: float, norm_inv: float) -> float:
    """``(1 - 3 a) / (a (||A|| + 3))`` with ``a = ||A^{-1}||``."""
    return (1.0 - 3.0 * norm_inv) / (norm_inv * (norm_a + 3.0))


def theta_bound_global(p: AveProblem, norm_kind: str = "two") -> float:
    """Largest theta with guaranteed Q-linear convergence when ``||A^{-1}|| < 1/3``.

    Raises :class:`BoundNotApplicableError` when ``||A^{-1}|| >= 1/3``.
    """
    norm_a, norm_inv = _norms(p, norm_kind)
    if not norm_inv < 1.0 / 3.0:
        raise BoundNotApplicableError(f"||A^-1|| = {norm_inv:.6g} is not below 1/3")
    return global_theta_formula(norm_a, norm_inv)


def all_sign_vectors(n: int) -> np.ndarray:
    return np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int8).reshape(-1, n)


@dataclass
class SignwiseTable:
    """Norms of ``A - diag(s)`` and of its inverse for every ``s`` in {-1,0,1}^n."""

    signs: np.ndarray
    norms: np.ndarray
    inv_norms: np.ndarray


def enumerate_sign_matrices(
    p: AveProblem, norm_kind: str = "two", max_n: int = 12, chunk: int = 8192
) -> SignwiseTable:
    n = p.n
    if n > max_n:
        raise DimensionError(f"sign enumeration limited to n <= {max_n}, got {n}")
    a = p.a_matrix.to_dense()
    signs = all_sign_vectors(n)
    norms = np.empty(len(signs))
    inv_norms = np.empty(len(signs))
    idx = np.arange(n)
    for start in range(0, len(signs), chunk):
        s = signs[start:start + chunk]
        m = np.broadcast_to(a, (len(s), n, n)).copy()
        m[:, idx, idx] -= s
        if norm_kind == "two":
            sv = np.linalg.svd(m, compute_uv=False)
            smax, smin = sv[:, 0], sv[:, -1]
            bad = smin <= n * _EPS * np.maximum(smax, 1e-300)
            if np.any(bad):
                raise SingularMatrixError(
                    f"A - diag(s) is singular for s = {tuple(s[np.argmax(bad)])}"
                )
            norms[start:start + len(s)] = smax
            inv_norms[start:start + len(s)] = 1.0 / smin
        else:
            axis = 1 if norm_kind == "one" else 2
            try:
                inv = np.linalg.inv(m)
            except np.linalg.LinAlgError:
                raise SingularMatrixError("A - diag(s) is singular for some s") from None
            if not np.all(np.isfinite(inv)):
                raise SingularMatrixError("A - diag(s) is singular for some s")
            norms[start:start + len(s)] = np.abs(m).sum(axis=axis).max(axis=1)
            inv_norms[start:start + len(s)] = np.abs(inv).sum(axis=axis).max(axis=1)
    return SignwiseTable(signs, norms, inv_norms)


def signwise_theta_formula(norm_m, norm_inv):
    """``(1 - 2 a) / (a (||A - D|| + 2))`` with ``a = ||(A - D)^{-1}||``."""
    return (1.0 - 2.0 * norm_inv) / (norm_inv * (norm_m + 2.0))


def theta_bound_signwise(p: AveProblem, norm_kind: str = "two", max_n: int = 12) -> float:
    """Minimum over every sign matrix ``D`` of the per-point tolerance bound.

    ``D(x)`` takes only the 3^n values ``diag(s)``, so the minimum over the
    enumeration is exactly the infimum over all ``x``.
    """
    table = enumerate_sign_matrices(p, norm_kind, max_n)
    if np.any(table.inv_norms >= 0.5):
        worst = float(table.inv_norms.max())
        raise BoundNotApplicableError(f"max ||(A-D)^-1|| = {worst:.6g} is not below 1/2")
    return float(np.min(signwise_theta_formula(table.norms, table.inv_norms)))


def contraction_factor(p: AveProblem, theta: float) -> float:
    """Q-linear rate ``a/(1-a) * (theta (||A|| + 3) + 2)``, ``a = ||A^{-1}||_2``."""
    norm_a, a = _two_norms(p)
    if not a < 1.0:
        raise BoundNotApplicableError(f"||A^-1||_2 = {a:.6g} >= 1; factor undefined")
    return a / (1.0 - a) * (theta * (norm_a + 3.0) + 2.0)


def signwise_contraction_factor(p: AveProblem, x, theta: float) -> float:
    """``||(A-D(x))^{-1}|| (theta (||A-D(x)|| + 2) + 2)`` in the 2-norm."""
    sv = np.linalg.svd(shifted_dense(p.a_matrix, sign_of(x)), compute_uv=False)
    return (theta * (sv[0] + 2.0) + 2.0) / sv[-1]


def is_admissible_step(p: AveProblem, x, x_next, theta: float) -> bool:
    """Whether ``x_next`` is an acceptable inexact Newton iterate from ``x``."""
    lhs = np.linalg.norm(newton_operator_apply(p, sign_of(x), x_next) - p.rhs)
    return bool(lhs <= theta * np.linalg.norm(residual(p, x)))


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass
class HypothesisFlag:
    name: str
    holds: bool
    quantity: Optional[float]
    threshold: float
    reason: str = ""

    def line(self) -> str:
        q = "n/a" if self.quantity is None else f"{self.quantity:.10g}"
        verdict = "true" if self.holds else "false"
        extra = f" ({self.reason})" if self.reason else ""
        return f"{self.name}: {verdict}  value={q}  threshold={self.threshold:g}{extra}"


@dataclass
class HypothesisReport:
    flags: list[HypothesisFlag]

    def __getitem__(self, name):
        for f in self.flags:
            if f.name == name:
                return f
        raise KeyError(name)


def verify_hypotheses(p: AveProblem, max_enum_n: int = 12) -> HypothesisReport:
    """Check the sufficient conditions used by the convergence theory.

    Flags, in order: all singular values exceed 1; ``||A^{-1}||_2 < 1``;
    ``||A^{-1}||_2 < 1/3``; and, for ``n <= max_enum_n``,
    ``max_s ||(A - diag(s))^{-1}||_2 < 1/2`` by enumeration.
    """
    flags = []
    try:
        _, sv_min = extreme_singular_values(p.a_matrix, seed=p.seed or 0)
    except AveError as exc:
        reason = f"estimation failed: {exc}"
        flags += [
            HypothesisFlag("sv_min_exceeds_1", False, None, 1.0, reason),
            HypothesisFlag("inv_norm_below_1", False, None, 1.0, reason),
            HypothesisFlag("inv_norm_below_third", False, None, 1.0 / 3.0, reason),
        ]
    else:
        inv = 1.0 / sv_min
        flags += [
            HypothesisFlag("sv_min_exceeds_1", sv_min > 1.0, sv_min, 1.0),
            HypothesisFlag("inv_norm_below_1", inv < 1.0, inv, 1.0),
            HypothesisFlag("inv_norm_below_third", inv < 1.0 / 3.0, inv, 1.0 / 3.0),
        ]
    if p.n <= max_enum_n:
        try:
            table = enumerate_sign_matrices(p, "two", max_enum_n)
        except SingularMatrixError as exc:
            flags.append(HypothesisFlag("signwise_inv_norm_below_half", False, None, 0.5, str(exc)))
        else:
            worst = float(table.inv_norms.max())
            flags.append(HypothesisFlag("signwise_inv_norm_below_half", worst < 0.5, worst, 0.5))
    else:
        flags.append(
            HypothesisFlag(
                "signwise_inv_norm_below_half", False, None, 0.5, f"skipped: n > {max_enum_n}"
            )
        )
    return HypothesisReport(flags)


# ---------------------------------------------------------------------------
# iterations


class _InnerFailure(Exception):
    def __init__(self, record):
        self.record = record


def resolve_theta(p: AveProblem, cfg: SolverConfig) -> tuple[float, bool]:
    """The tolerance to use and whether the convergence bound backs it."""
    if cfg.theta != "auto":
        return float(cfg.theta), True
    try:
        bound = theta_bound_global(p, cfg.norm_kind_for_bounds)
    except (BoundNotApplicableError, SingularMatrixError):
        return cfg.fallback_theta, False
    return THETA_SAFETY * bound, True


def _newton_loop(p, x0, cfg, theta, step: Callable, method: str, bound_ok=True) -> SolveReport:
    x = np.array(x0, dtype=np.float64)
    if x.shape != (p.n,):
        raise DimensionError(f"x0 has shape {x.shape}, expected ({p.n},)")
    xs = p.planted_solution

    def err(v):
        return None if xs is None else float(np.linalg.norm(v - xs))

    rnorm = float(np.linalg.norm(residual(p, x)))
    trace = [IterationRecord(0, rnorm, error_to_planted=err(x))]
    iterates = [x.copy()] if cfg.keep_iterates else []
    notes = [] if bound_ok else [f"bound inapplicable; theta set to {theta:g}"]

    def report(status, k):
        return SolveReport(
            Status(status), k, x, trace, theta, method, iterates, bound_ok, notes
        )

    k = 0
    while k < cfg.max_outer:
        if rnorm <= cfg.outer_tol:
            return report(Status.SOLUTION_FOUND, k)
        s = sign_of(x)
        try:
            x_new, rec = step(x, s, rnorm)
        except SingularMatrixError as exc:
            notes.append(f"A - D(x_{k}) singular: {exc}")
            return report(Status.SINGULAR_SYSTEM, k)
        except _InnerFailure as fail:
            notes.append(
                f"inner solve missed target {fail.record.inner_target:.3e} "
                f"(reached {fail.record.inner_residual_norm:.3e})"
            )
            return report(Status.INNER_FAILURE, k)
        k += 1
        fixed_point = np.array_equal(x_new, x)
        x = x_new
        rnorm = float(np.linalg.norm(residual(p, x)))
        rec.k, rec.residual_norm, rec.error_to_planted = k, rnorm, err(x)
        trace.append(rec)
        if cfg.keep_iterates:
            iterates.append(x.copy())
        if fixed_point:
            if rnorm <= cfg.outer_tol:
                return report(Status.SOLUTION_FOUND, k)
            notes.append(f"stagnated: x_{k} == x_{k - 1} with residual {rnorm:.3e}")
            return report(Status.MAX_ITER, k)
        if not np.max(np.abs(x)) <= cfg.divergence_limit:
            notes.append("diverged: iterate exceeded the divergence limit")
            return report(Status.MAX_ITER, k)
    return report(Status.SOLUTION_FOUND if rnorm <= cfg.outer_tol else Status.MAX_ITER, k)


def exact_newton(p: AveProblem, x0, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Exact semi-smooth Newton: ``(A - D(x_k)) x_{k+1} = b`` by dense LU."""
    cfg = cfg or SolverConfig(method="exact")
    a_dense = p.a_matrix.to_dense()

    def step(x, s: SignVector, rnorm):
        m = shifted_dense(a_dense, s)
        x_new = dense_lu_solve(m, p.rhs)
        inner = float(np.linalg.norm(m @ x_new - p.rhs))
        return x_new, IterationRecord(0, 0.0, 0, inner, 0.0)

    return _newton_loop(p, x0, cfg, 0.0, step, "exact")


def inexact_newton(p: AveProblem, x0, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Inexact semi-smooth Newton with LSQR inner solves.

    Each inner solve starts from ``x_k`` (unless ``warm_start`` is off) and
    stops once the verified residual of ``(A - D(x_k)) y = b`` is at most
    ``theta * ||F(x_k)||_2``.
    """
    cfg = cfg or SolverConfig(method="inexact")
    theta, bound_ok = resolve_theta(p, cfg)
    max_inner = cfg.max_inner if cfg.max_inner is not None else 10 * p.n
    abs_a = p.a_matrix.abs()
    bnorm = float(np.linalg.norm(p.rhs))
    rtol = theta if theta > 0 else cfg.zero_theta_rtol

    def step(x, s: SignVector, rnorm):
        op = SignShiftedOperator(p.a_matrix, s)
        target = rtol * rnorm
        ax = np.abs(x)
        floor = cfg.rounding_guard * _EPS * (float(np.linalg.norm(spmv(abs_a, ax) + ax)) + bnorm)
        floored = floor > target
        start = x if cfg.warm_start else np.zeros_like(x)
        y, st = lsqr(op, p.rhs, start, max(target, floor), max_inner)
        rec = IterationRecord(0, 0.0, st.iterations, st.final_residual_norm, target, floored)
        # below the rounding floor the best reachable point is accepted as is
        if not st.converged and not floored:
            raise _InnerFailure(rec)
        return y, rec

    return _newton_loop(p, x0, cfg, theta, step, "inexact", bound_ok)


def solve(p: AveProblem, x0, cfg: Optional[SolverConfig] = None) -> SolveReport:
    cfg = cfg or SolverConfig()
    if cfg.method == "exact":
        return exact_newton(p, x0, cfg)
    return inexact_newton(p, x0, cfg)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(float(v), ".17g")


def write_trace_csv(report: SolveReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "residual_norm", "inner_iters", "inner_residual", "error_to_planted"])
        for r in report.trace:
            w.writerow(
                [r.k, _fmt(r.residual_norm), r.inner_iterations,
                 _fmt(r.inner_residual_norm), _fmt(r.error_to_planted)]
            )
