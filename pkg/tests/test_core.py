import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from avenewton.core import (
    AveProblem,
    SignShiftedOperator,
    SignVector,
    load_problem,
    newton_operator_apply,
    problem_from_json,
    problem_to_json,
    residual,
    save_problem,
    shifted_dense,
    sign_of,
)
from avenewton.exceptions import DimensionError, ProblemFormatError
from avenewton.linalg import CsrMatrix

reals = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def small_problem(a, x_star):
    a = np.asarray(a, dtype=float)
    m = CsrMatrix.from_dense(a)
    return AveProblem(m, a @ x_star - np.abs(x_star), planted_solution=x_star)


@st.composite
def problems(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    a = draw(hnp.arrays(np.float64, (n, n), elements=st.floats(-10, 10)))
    a = a + 12.0 * np.eye(n)
    xs = draw(hnp.arrays(np.float64, n, elements=st.floats(-100, 100)))
    return small_problem(a, xs)


class TestSigns:
    def test_sign_of(self):
        assert np.array_equal(sign_of([-2.0, 0.0, 3.5]).signs, [-1, 0, 1])

    def test_signed_zero_maps_to_zero(self):
        assert sign_of([-0.0]).signs[0] == 0

    def test_apply_gives_abs(self):
        x = np.array([-1.5, 0.0, 2.0])
        np.testing.assert_array_equal(sign_of(x).apply(x), np.abs(x))

    def test_rejects_bad_entries(self):
        with pytest.raises(ValueError):
            SignVector([2, 0])

    def test_equality_and_hash(self):
        assert SignVector([1, -1]) == sign_of([3.0, -0.5])
        assert len({SignVector([1, 0]), SignVector([1, 0]), SignVector([0, 1])}) == 2

    @given(hnp.arrays(np.float64, st.integers(1, 20), elements=reals))
    def test_d_of_x_times_x_is_abs(self, x):
        np.testing.assert_array_equal(sign_of(x).apply(x), np.abs(x))


class TestResidual:
    def test_identity_example(self, identity4):
        np.testing.assert_array_equal(residual(identity4, np.ones(2)), [2.0, 2.0])
        np.testing.assert_allclose(residual(identity4, np.full(2, 1 / 3)), 0.0, atol=1e-15)

    def test_oscillation_start(self, oscillation):
        # A e - |e| - b = (0, 2) - (1, 1) - (-1, -3)
        np.testing.assert_array_equal(residual(oscillation, np.ones(2)), [0.0, 4.0])

    def test_wrong_length(self, identity4):
        with pytest.raises(DimensionError):
            residual(identity4, np.ones(3))

    @given(problems())
    @settings(max_examples=50, deadline=None)
    def test_planted_solution_is_root(self, p):
        scale = max(1.0, np.linalg.norm(p.rhs))
        assert np.linalg.norm(residual(p, p.planted_solution)) <= 1e-10 * scale

    @given(problems(), st.data())
    @settings(max_examples=50, deadline=None)
    def test_newton_operator_is_linearization(self, p, data):
        # F(x) = (A - D(x)) x - b, exactly the piecewise-linear structure
        x = data.draw(hnp.arrays(np.float64, p.n, elements=st.floats(-100, 100)))
        s = sign_of(x)
        lhs = newton_operator_apply(p, s, x) - p.rhs
        np.testing.assert_allclose(lhs, residual(p, x), rtol=0, atol=1e-9 * (1 + np.abs(x).max()))


class TestOperators:
    def test_matrix_free_matches_dense(self, rng):
        a = rng.standard_normal((5, 5))
        s = SignVector([1, -1, 0, 1, -1])
        op = SignShiftedOperator(CsrMatrix.from_dense(a), s)
        m = a - np.diag(s.signs)
        v = rng.standard_normal(5)
        np.testing.assert_allclose(op.matvec(v), m @ v, atol=1e-14)
        np.testing.assert_allclose(op.rmatvec(v), m.T @ v, atol=1e-14)
        np.testing.assert_array_equal(shifted_dense(CsrMatrix.from_dense(a), s), m)
        np.testing.assert_array_equal(shifted_dense(a, s), m)


class TestProblem:
    def test_rejects_rectangular(self):
        with pytest.raises(DimensionError):
            AveProblem(CsrMatrix.from_dense(np.ones((2, 3))), np.ones(2))

    def test_rejects_wrong_planted(self):
        with pytest.raises(ValueError):
            AveProblem(CsrMatrix.identity(2, 4.0), np.ones(2), planted_solution=np.ones(2))

    def test_arrays_frozen(self, identity4):
        with pytest.raises(ValueError):
            identity4.rhs[0] = 0.0


class TestJson:
    def test_round_trip_exact(self, tmp_path, rng):
        a = rng.standard_normal((4, 4)) + 5 * np.eye(4)
        a[0, 3] = 0.0
        xs = rng.uniform(-100, 100, 4)
        p = AveProblem(
            CsrMatrix.from_dense(a), a @ xs - np.abs(xs), planted_solution=xs,
            theta_hint=0.01, sv_min=3.5, sv_max=9.25, seed=11,
        )
        path = tmp_path / "p.json"
        save_problem(p, path)
        q = load_problem(path)
        np.testing.assert_array_equal(q.a_matrix.to_dense(), a)
        np.testing.assert_array_equal(q.rhs, p.rhs)
        np.testing.assert_array_equal(q.planted_solution, xs)
        assert (q.theta_hint, q.sv_min, q.sv_max, q.seed) == (0.01, 3.5, 9.25, 11)

    @given(problems())
    @settings(max_examples=30, deadline=None)
    def test_round_trip_property(self, p):
        q = problem_from_json(problem_to_json(p))
        np.testing.assert_array_equal(q.a_matrix.to_dense(), p.a_matrix.to_dense())
        np.testing.assert_array_equal(q.rhs, p.rhs)

    def test_text_is_deterministic(self, identity4):
        assert problem_to_json(identity4) == problem_to_json(identity4)
        assert json.loads(problem_to_json(identity4))["format"] == "coo"

    @pytest.mark.parametrize(
        "edit, field",
        [
            (lambda d: d.pop("b"), "b"),
            (lambda d: d.update(n="2"), "n"),
            (lambda d: d.update(format="csr"), "format"),
            (lambda d: d.update(rows=[0, 5]), "rows"),
            (lambda d: d.update(vals=[1.0]), "vals"),
            (lambda d: d.update(b=[1.0]), "b"),
            (lambda d: d.update(x_star=[1.0, 2.0, 3.0]), "x_star"),
        ],
    )
    def test_malformed_names_field(self, identity4, edit, field):
        d = json.loads(problem_to_json(identity4))
        edit(d)
        with pytest.raises(ProblemFormatError) as exc:
            problem_from_json(json.dumps(d))
        assert exc.value.field == field
        assert field in str(exc.value)

    def test_invalid_json(self):
        with pytest.raises(ProblemFormatError):
            problem_from_json("{not json")
