"""Absolute value equation ``A x - |x| = b``: problem type and basic maps."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DimensionError, ProblemFormatError
from .linalg import CsrMatrix, spmv, spmv_transpose

PLANTED_RTOL = 1e-10


def _frozen(v) -> np.ndarray:
    a = np.array(v, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AveProblem:
    """Data of one instance. Immutable once built.

    ``sv_min`` / ``sv_max`` are the extreme singular values of ``a_matrix``
    when they are known a priori (e.g. from the generator).
    """

    a_matrix: CsrMatrix
    rhs: np.ndarray
    planted_solution: Optional[np.ndarray] = None
    theta_hint: Optional[float] = None
    sv_min: Optional[float] = None
    sv_max: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        a = self.a_matrix
        if a.n_rows != a.n_cols:
            raise DimensionError(f"A must be square, got {a.shape}")
        if a.n_rows == 0:
            raise DimensionError("empty problem (n = 0)")
        rhs = _frozen(self.rhs)
        if rhs.shape != (a.n_rows,):
            raise DimensionError(f"rhs has shape {rhs.shape}, expected ({a.n_rows},)")
        object.__setattr__(self, "rhs", rhs)
        if self.planted_solution is not None:
            xs = _frozen(self.planted_solution)
            if xs.shape != rhs.shape:
                raise DimensionError("planted solution has the wrong length")
            object.__setattr__(self, "planted_solution", xs)
            res = np.linalg.norm(residual(self, xs))
            if res > PLANTED_RTOL * max(1.0, float(np.linalg.norm(rhs))):
                raise ValueError(f"planted solution has residual {res:.3e}")
        if self.sv_min is not None and not self.sv_min > 0:
            raise ValueError("sv_min must be positive")
        if self.sv_max is not None and not self.sv_max > 0:
            raise ValueError("sv_max must be positive")
        if self.theta_hint is not None and not self.theta_hint >= 0:
            raise ValueError("theta_hint must be nonnegative")

    @property
    def n(self) -> int:
        return self.a_matrix.n_rows


@dataclass(frozen=True, eq=False)
class SignVector:
    """Diagonal of ``D(x) = diag(sgn(x))``, entries in {-1, 0, 1}."""

    signs: np.ndarray = field()

    def __post_init__(self):
        s = np.asarray(self.signs, dtype=np.int8)
        if s.ndim != 1 or np.any(np.abs(s) > 1):
            raise ValueError("signs must be a vector with entries in {-1, 0, 1}")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "signs", s)

    def __len__(self):
        return self.signs.size

    def apply(self, v) -> np.ndarray:
        """``D v``; for the source vector this returns ``|x|`` exactly."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != self.signs.shape:
            raise DimensionError("sign vector and operand differ in length")
        return self.signs * v

    def __eq__(self, other):
        return isinstance(other, SignVector) and np.array_equal(self.signs, other.signs)

    def __hash__(self):
        return hash(self.signs.tobytes())


def sign_of(x) -> SignVector:
    return SignVector(np.sign(np.asarray(x, dtype=np.float64)).astype(np.int8))


def _check_vec(p: AveProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.n,):
        raise DimensionError(f"vector has shape {x.shape}, expected ({p.n},)")
    return x


def residual(p: AveProblem, x) -> np.ndarray:
    """``F(x) = A x - |x| - b``."""
    x = _check_vec(p, x)
    return spmv(p.a_matrix, x) - np.abs(x) - p.rhs


def newton_operator_apply(p: AveProblem, s: SignVector, v) -> np.ndarray:
    """``(A - D) v`` without forming ``A - D``."""
    v = _check_vec(p, v)
    return spmv(p.a_matrix, v) - s.apply(v)


class SignShiftedOperator:
    """Matrix-free ``A - diag(s)`` with its transpose, for iterative solvers."""

    def __init__(self, a: CsrMatrix, s: SignVector):
        self.a = a
        self._s = s.signs.astype(np.float64)
        self.shape = a.shape

    def matvec(self, v):
        return spmv(self.a, v) - self._s * v

    def rmatvec(self, v):
        return spmv_transpose(self.a, v) - self._s * v


def shifted_dense(a: CsrMatrix | np.ndarray, s: SignVector) -> np.ndarray:
    """Dense copy of ``A - diag(s)``, as handed to a direct solver."""
    m = a.to_dense() if isinstance(a, CsrMatrix) else np.array(a, dtype=np.float64)
    m.flat[:: m.shape[0] + 1] -= s.signs
    return m


# ---------------------------------------------------------------------------
# problem file format


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("non-finite value cannot be serialized")
    return format(float(x), ".17g")


def _fmt_array(a) -> str:
    return "[" + ",".join(_fmt(v) for v in np.asarray(a, dtype=np.float64)) + "]"


def _int_array(a) -> str:
    return "[" + ",".join(str(int(v)) for v in a) + "]"


def problem_to_json(p: AveProblem) -> str:
    rows, cols, vals = p.a_matrix.to_coo()
    parts = [
        f'"n":{p.n}',
        '"format":"coo"',
        f'"rows":{_int_array(rows)}',
        f'"cols":{_int_array(cols)}',
        f'"vals":{_fmt_array(vals)}',
        f'"b":{_fmt_array(p.rhs)}',
    ]
    if p.planted_solution is not None:
        parts.append(f'"x_star":{_fmt_array(p.planted_solution)}')
    if p.theta_hint is not None:
        parts.append(f'"theta":{_fmt(p.theta_hint)}')
    if p.sv_min is not None:
        parts.append(f'"sv_min":{_fmt(p.sv_min)}')
    if p.sv_max is not None:
        parts.append(f'"sv_max":{_fmt(p.sv_max)}')
    if p.seed is not None:
        parts.append(f'"seed":{int(p.seed)}')
    return "{" + ",\n".join(parts) + "}\n"


def _get(obj, key, kind, required=True):
    if key not in obj:
        if required:
            raise ProblemFormatError("missing field", key)
        return None
    val = obj[key]
    if kind == "int":
        if not isinstance(val, int) or isinstance(val, bool):
            raise ProblemFormatError("expected an integer", key)
    elif kind == "real":
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ProblemFormatError("expected a number", key)
        val = float(val)
    elif kind in ("ints", "reals"):
        if not isinstance(val, list):
            raise ProblemFormatError("expected an array", key)
        try:
            val = np.array(val, dtype=np.int64 if kind == "ints" else np.float64)
        except (TypeError, ValueError) as exc:
            raise ProblemFormatError(f"bad array entry ({exc})", key) from None
        if val.ndim != 1:
            raise ProblemFormatError("expected a flat array", key)
    return val


def problem_from_dict(obj) -> AveProblem:
    if not isinstance(obj, dict):
        raise ProblemFormatError("problem must be a JSON object")
    n = _get(obj, "n", "int")
    if n < 1:
        raise ProblemFormatError("n must be at least 1", "n")
    if obj.get("format") != "coo":
        raise ProblemFormatError('only "coo" is supported', "format")
    rows = _get(obj, "rows", "ints")
    cols = _get(obj, "cols", "ints")
    vals = _get(obj, "vals", "reals")
    if not (rows.size == cols.size == vals.size):
        raise ProblemFormatError("rows, cols and vals differ in length", "vals")
    for key, idx in (("rows", rows), ("cols", cols)):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ProblemFormatError("index out of range", key)
    b = _get(obj, "b", "reals")
    if b.size != n:
        raise ProblemFormatError(f"length {b.size} != n", "b")
    x_star = _get(obj, "x_star", "reals", required=False)
    if x_star is not None and x_star.size != n:
        raise ProblemFormatError(f"length {x_star.size} != n", "x_star")
    seed = _get(obj, "seed", "int", required=False)
    try:
        return AveProblem(
            CsrMatrix.from_coo(n, n, rows, cols, vals),
            b,
            planted_solution=x_star,
            theta_hint=_get(obj, "theta", "real", required=False),
            sv_min=_get(obj, "sv_min", "real", required=False),
            sv_max=_get(obj, "sv_max", "real", required=False),
            seed=seed,
        )
    except (ValueError, DimensionError) as exc:
        raise ProblemFormatError(str(exc)) from None


def problem_from_json(text: str) -> AveProblem:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON: {exc}") from None
    return problem_from_dict(obj)


def save_problem(p: AveProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(problem_to_json(p))


def load_problem(path) -> AveProblem:
    with open(os.fspath(path), encoding="utf-8") as fh:
        return problem_from_json(fh.read())
