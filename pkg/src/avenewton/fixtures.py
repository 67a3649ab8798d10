"""Small hand-checkable instances used by tests, the CLI and the scripts."""

import numpy as np

from .core import AveProblem
from .linalg import CsrMatrix


def scaled_identity(scale: float = 4.0, n: int = 2) -> AveProblem:
    """``A = scale * I``, ``b = e``; the solution is ``e / (scale - 1)``.

    For ``scale <= 1`` there is no solution and none is planted.
    """
    xs = np.full(n, 1.0 / (scale - 1.0)) if scale > 1.0 else None
    return AveProblem(
        CsrMatrix.identity(n, scale),
        np.ones(n),
        planted_solution=xs,
        sv_min=float(scale),
        sv_max=float(scale),
    )


def oscillating() -> AveProblem:
    """2x2 instance on which exact Newton from ``e`` cycles between two points.

    ``A - D(x)`` is invertible for every ``x`` but ``||A^{-1}||_2 > 1``; the
    unique solution is ``-e``.
    """
    a = CsrMatrix.from_dense([[1.0, -1.0], [3.0, -1.0]])
    return AveProblem(a, np.array([-1.0, -3.0]), planted_solution=np.array([-1.0, -1.0]))
