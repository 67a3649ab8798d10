import json
import warnings

import numpy as np
import pytest

from avenewton.core import residual
from avenewton.exceptions import ProblemFormatError
from avenewton.generator import (
    GeneratorSpec,
    dumps17,
    generate,
    generate_instance,
    generate_suite,
    manifest_x0_for,
    read_suite,
    rotate_to_density,
    write_suite,
)
from avenewton.linalg import extreme_singular_values
from avenewton.rng import PortableRng
from avenewton.solver import SolverConfig, exact_newton, verify_hypotheses
from oracles import jacobi_singular_values


class TestPortableRng:
    def test_open_interval(self):
        u = PortableRng(3).open01(100_000)
        assert u.min() > 0 and u.max() < 1

    def test_streams_reproducible_and_distinct(self):
        a = PortableRng(5, 1).uniform(8)
        np.testing.assert_array_equal(a, PortableRng(5, 1).uniform(8))
        assert not np.array_equal(a, PortableRng(5, 2).uniform(8))
        assert not np.array_equal(PortableRng(5).split(0).open01(4), PortableRng(5).split(1).open01(4))

    def test_integers_range(self):
        k = PortableRng(1).integers(10_000, 7)
        assert k.min() == 0 and k.max() == 6

    def test_rejects_negative_seed(self):
        with pytest.raises(ValueError):
            PortableRng(-1)


class TestSpec:
    @pytest.mark.parametrize(
        "kw", [dict(n=0), dict(density=0.0), dict(density=1.5), dict(seed=-1),
               dict(solution_range=(1.0, -1.0)), dict(rc_spread=0.5)]
    )
    def test_rejects(self, kw):
        base = dict(n=4, density=0.5, seed=0)
        base.update(kw)
        with pytest.raises(ValueError):
            GeneratorSpec(**base)

    def test_warns_below_diagonal_density(self):
        with pytest.warns(UserWarning):
            GeneratorSpec(n=10, density=0.05, seed=0)


class TestGenerate:
    @pytest.mark.parametrize("seed", range(6))
    def test_singular_values_preserved(self, seed):
        p = generate(GeneratorSpec(n=15, density=0.4, seed=seed))
        ref = jacobi_singular_values(p.a_matrix.to_dense())
        assert ref[-1] == pytest.approx(p.sv_min, rel=1e-10)
        assert ref[0] == pytest.approx(p.sv_max, rel=1e-10)
        assert p.sv_min > 3

    @pytest.mark.parametrize("seed", range(4))
    def test_measured_sv_min(self, seed):
        p = generate(GeneratorSpec(n=80, density=0.1, seed=seed))
        _, small = extreme_singular_values(p.a_matrix, tol=1e-13)
        assert small == pytest.approx(p.sv_min, rel=1e-6)
        assert all(f.holds for f in verify_hypotheses(p).flags[:3])

    def test_planted_residual(self):
        p = generate(GeneratorSpec(n=60, density=0.2, seed=3))
        assert np.linalg.norm(residual(p, p.planted_solution)) <= 1e-10 * max(1, np.linalg.norm(p.rhs))

    def test_density_reached(self):
        inst = generate_instance(GeneratorSpec(n=50, density=0.1, seed=1))
        assert inst.achieved_density >= 0.1
        assert inst.achieved_density < 0.1 + 4 * 50 / 2500

    def test_theta_hint(self):
        p = generate(GeneratorSpec(n=10, density=0.5, seed=2))
        a = 1 / p.sv_min
        assert p.theta_hint == pytest.approx(0.9999 * (1 - 3 * a) / (a * (p.sv_max + 3)))

    def test_no_rescale(self):
        p = generate(GeneratorSpec(n=10, density=0.5, seed=2, sv_rescale=False))
        assert 0 < p.sv_min and p.sv_max < 1
        assert p.theta_hint is None

    def test_rc_spread(self):
        p = generate(GeneratorSpec(n=40, density=0.2, seed=4, rc_spread=40.0))
        assert p.sv_max / p.sv_min == pytest.approx(40.0, rel=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_scalar_case(self, seed):
        inst = generate_instance(GeneratorSpec(n=1, density=1.0, seed=seed))
        p = inst.problem
        assert abs(p.a_matrix.to_dense()[0, 0]) > 3
        r = exact_newton(p, inst.x0, SolverConfig(method="exact"))
        assert r.solved
        # one step if x0 has the solution's sign, one correction otherwise
        assert r.iterations <= 2

    def test_deterministic(self):
        a = generate_instance(GeneratorSpec(n=30, density=0.2, seed=9))
        b = generate_instance(GeneratorSpec(n=30, density=0.2, seed=9))
        np.testing.assert_array_equal(a.problem.a_matrix.vals, b.problem.a_matrix.vals)
        np.testing.assert_array_equal(a.x0, b.x0)
        c = generate(GeneratorSpec(n=30, density=0.2, seed=10))
        assert not np.array_equal(a.problem.rhs, c.rhs)

    def test_unreachable_density_warns(self):
        with pytest.warns(UserWarning, match="not reached"):
            rotate_to_density(np.ones(4), 1.0, PortableRng(0), max_rotations=1)


class TestSuite:
    def test_round_trip_bitwise(self, tmp_path):
        insts = generate_suite(12, 0.3, 3, seed=5)
        write_suite(insts, tmp_path)
        suite = read_suite(tmp_path)
        assert len(suite) == 3
        assert [e.seed for e in suite.entries] == [5, 6, 7]
        for inst, e in zip(insts, suite.entries):
            np.testing.assert_array_equal(e.problem.a_matrix.vals, inst.problem.a_matrix.vals)
            np.testing.assert_array_equal(e.problem.rhs, inst.problem.rhs)
            np.testing.assert_array_equal(e.x0, inst.x0)
            assert e.problem.sv_min == inst.problem.sv_min
        assert suite.generator_params["n"] == 12

    def test_rewrite_is_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            write_suite(generate_suite(8, 0.4, 2, seed=1), tmp_path / d)
        for name in ("manifest.json", "problem_0000.json", "problem_0001.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_missing_x0(self, tmp_path):
        write_suite(generate_suite(5, 0.5, 1, seed=0), tmp_path)
        path = tmp_path / "manifest.json"
        m = json.loads(path.read_text())
        del m["instances"][0]["x0"]
        path.write_text(json.dumps(m))
        with pytest.raises(ProblemFormatError, match="x0"):
            read_suite(tmp_path)

    def test_wrong_x0_length(self, tmp_path):
        write_suite(generate_suite(5, 0.5, 1, seed=0), tmp_path)
        path = tmp_path / "manifest.json"
        m = json.loads(path.read_text())
        m["instances"][0]["x0"] = [0.0]
        path.write_text(json.dumps(m))
        with pytest.raises(ProblemFormatError):
            read_suite(tmp_path)

    def test_manifest_x0_lookup(self, tmp_path):
        insts = generate_suite(5, 0.5, 2, seed=0)
        write_suite(insts, tmp_path)
        np.testing.assert_array_equal(manifest_x0_for(tmp_path / "problem_0001.json"), insts[1].x0)
        assert manifest_x0_for(tmp_path / "elsewhere" / "p.json") is None

    def test_dumps17(self):
        assert dumps17({"a": [0.1, 1], "b": None}) == '{"a":[0.10000000000000001,1],"b":null}'
        with pytest.raises(TypeError):
            dumps17(object())
