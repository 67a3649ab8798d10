import json
import shutil
import subprocess

import numpy as np
import pytest

from avenewton import bench, fixtures
from avenewton.cli import main
from avenewton.core import save_problem


@pytest.fixture
def problem_files(tmp_path):
    id4 = tmp_path / "id4.json"
    osc = tmp_path / "osc.json"
    save_problem(fixtures.scaled_identity(), id4)
    save_problem(fixtures.oscillating(), osc)
    return id4, osc


@pytest.fixture
def suite_dir(tmp_path):
    d = tmp_path / "suite"
    assert main(["generate", "--n", "20", "--density", "0.2", "--count", "3",
                 "--seed", "7", "--out-dir", str(d)]) == 0
    return d


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGenerate:
    def test_writes_suite(self, suite_dir):
        files = sorted(p.name for p in suite_dir.iterdir())
        assert files == ["manifest.json", "problem_0000.json", "problem_0001.json", "problem_0002.json"]
        m = json.loads((suite_dir / "manifest.json").read_text())
        assert [r["seed"] for r in m["instances"]] == [7, 8, 9]

    def test_regenerate_is_bitwise_identical(self, suite_dir, tmp_path):
        again = tmp_path / "again"
        main(["generate", "--n", "20", "--density", "0.2", "--count", "3",
              "--seed", "7", "--out-dir", str(again)])
        for f in suite_dir.iterdir():
            assert f.read_bytes() == (again / f.name).read_bytes()

    @pytest.mark.parametrize("density", ["1.5", "0", "abc"])
    def test_bad_density(self, capsys, tmp_path, density):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--n", "3", "--density", density, "--out-dir", str(tmp_path)])
        assert exc.value.code == 2

    def test_rc_spread(self, capsys, tmp_path):
        code, _, _ = run(capsys, "generate", "--n", 10, "--density", 0.3, "--rc-spread", 5,
                         "--out-dir", tmp_path / "s")
        assert code == 0
        m = json.loads((tmp_path / "s" / "manifest.json").read_text())
        r = m["instances"][0]
        assert r["sv_max"] / r["sv_min"] == pytest.approx(5.0)


class TestSolve:
    def test_identity_exact(self, capsys, problem_files):
        code, out, _ = run(capsys, "solve", "--problem", problem_files[0], "--method", "exact",
                           "--x0", "file:" + str(_write_x0(problem_files[0].parent, [1, 1])))
        assert code == 0
        assert out.splitlines()[0] == "Solution found"

    def test_oscillation_fails(self, capsys, problem_files):
        x0 = _write_x0(problem_files[1].parent, [1, 1])
        code, out, _ = run(capsys, "solve", "--problem", problem_files[1], "--method", "exact",
                           "--x0", f"file:{x0}")
        assert code == 1
        assert out.startswith("Failure: max_iter")
        assert "iterations: 50" in out

    def test_theta_zero_matches_exact_count(self, capsys, problem_files):
        counts = {}
        for method, extra in (("exact", []), ("inexact", ["--theta", "0"])):
            _, out, _ = run(capsys, "solve", "--problem", problem_files[0], "--method", method,
                            "--x0", "random:3", *extra)
            counts[method] = [ln for ln in out.splitlines() if ln.startswith("iterations")]
        assert counts["exact"] == counts["inexact"]

    def test_theta_with_exact_is_usage_error(self, capsys, problem_files):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--problem", str(problem_files[0]), "--method", "exact", "--theta", "0.1"])
        assert exc.value.code == 2

    def test_manifest_start_and_trace(self, capsys, suite_dir, tmp_path):
        trace = tmp_path / "t.csv"
        code, out, _ = run(capsys, "solve", "--problem", suite_dir / "problem_0001.json",
                           "--trace", trace)
        assert code == 0
        rows = trace.read_text().splitlines()
        m = json.loads((suite_dir / "manifest.json").read_text())
        x0 = np.array(m["instances"][1]["x0"])
        from avenewton.core import load_problem, residual
        r0 = np.linalg.norm(residual(load_problem(suite_dir / "problem_0001.json"), x0))
        assert float(rows[1].split(",")[1]) == pytest.approx(r0, rel=1e-15)

    @pytest.mark.parametrize("x0", ["bogus", "random:x", "file:/no/such/file"])
    def test_bad_x0(self, capsys, problem_files, x0):
        code, _, err = run(capsys, "solve", "--problem", problem_files[0], "--x0", x0)
        assert code == 2 and err.startswith("error:")

    def test_missing_problem(self, capsys, tmp_path):
        code, out, err = run(capsys, "solve", "--problem", tmp_path / "nope.json")
        assert code == 2 and out == "" and "error" in err

    def test_malformed_problem(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"n": 2, "format": "coo"}')
        code, _, err = run(capsys, "solve", "--problem", bad)
        assert code == 2 and "rows" in err


def _write_x0(d, values):
    path = d / "x0.json"
    path.write_text(json.dumps(values))
    return path


class TestVerify:
    def test_generated_all_true(self, capsys, tmp_path):
        main(["generate", "--n", "8", "--density", "0.5", "--out-dir", str(tmp_path / "s")])
        capsys.readouterr()
        code, out, _ = run(capsys, "verify", "--problem", tmp_path / "s" / "problem_0000.json")
        assert code == 0
        lines = out.splitlines()
        assert len(lines) == 4 and all(": true" in ln for ln in lines)

    def test_oscillation(self, capsys, problem_files):
        code, out, _ = run(capsys, "verify", "--problem", problem_files[1])
        assert code == 0
        assert "inv_norm_below_1: false" in out and "inv_norm_below_third: false" in out

    def test_identity_flag_one(self, capsys, tmp_path):
        p = tmp_path / "i.json"
        save_problem(fixtures.scaled_identity(1.0), p)
        _, out, _ = run(capsys, "verify", "--problem", p)
        assert out.startswith("sv_min_exceeds_1: false")


class TestBenchProfile:
    def test_pipeline(self, capsys, suite_dir, tmp_path):
        results = tmp_path / "r.csv"
        code, out, _ = run(capsys, "bench", "--suite", suite_dir, "--reps", 2, "--out", results)
        assert code == 0
        rows = results.read_text().splitlines()
        assert len(rows) == 1 + 6
        assert [r.split(",")[:2] for r in rows[1:3]] == [["problem_0000.json", "exact"],
                                                         ["problem_0000.json", "inexact"]]
        prefix = tmp_path / "out"
        code, out, _ = run(capsys, "profile", "--results", results, "--out-prefix", prefix)
        assert code == 0
        summary = bench.read_summary_csv(f"{prefix}_summary.csv")
        assert [m for m, _, _ in summary] == ["exact", "inexact"]
        assert all(rob == 100.0 for _, _, rob in summary)

    def test_profile_symmetric(self, capsys, tmp_path):
        results = tmp_path / "r.csv"
        bench.write_results_csv(
            bench.BenchResults.from_times([[1.0, 2.0], [2.0, 1.0]], ["exact", "inexact"]), results
        )
        run(capsys, "profile", "--results", results, "--out-prefix", tmp_path / "p")
        lines = (tmp_path / "p_summary.csv").read_text().splitlines()
        assert lines[2:] == ["exact,50.0,100.0", "inexact,50.0,100.0"]

    def test_profile_failed_cell(self, capsys, tmp_path):
        results = tmp_path / "r.csv"
        bench.write_results_csv(
            bench.BenchResults.from_times([[1.0, None], [2.0, 1.0]], ["exact", "inexact"]), results
        )
        run(capsys, "profile", "--results", results, "--out-prefix", tmp_path / "p")
        rows = bench.read_summary_csv(tmp_path / "p_summary.csv")
        assert dict((m, rob) for m, _, rob in rows)["inexact"] < 100.0

    def test_unknown_method(self, capsys, suite_dir):
        code, _, err = run(capsys, "bench", "--suite", suite_dir, "--methods", "newton")
        assert code == 2 and "newton" in err

    def test_missing_suite(self, capsys, tmp_path):
        code, _, _ = run(capsys, "bench", "--suite", tmp_path / "none")
        assert code == 2


@pytest.mark.skipif(shutil.which("avenewton") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = subprocess.run(["avenewton", "generate", "--n", "3", "--density", "1.5",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 2
    assert "density" in out.stderr
