"""Timing runs over a suite and performance profiles of the results.

For problem ``p`` and method ``s`` with median time ``t[p, s]`` the ratio is
``r[p, s] = t[p, s] / min_s t[p, s]`` (``inf`` for failures) and the profile
``rho_s(tau)`` is the fraction of problems with ``r[p, s] <= tau``. Times are
wall-clock medians over repeated runs.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .generator import Suite, SuiteEntry
from .solver import SolverConfig, Status, solve

METHODS = ("exact", "inexact")
ERROR_STATUS = "error"


@dataclass
class BenchResults:
    """Tables indexed ``[problem, method]``; failed cells hold NaN times."""

    methods: list[str]
    problems: list[str]
    time_seconds: np.ndarray
    iterations: np.ndarray
    statuses: list[list[str]]

    def __post_init__(self):
        shape = (len(self.problems), len(self.methods))
        self.time_seconds = np.asarray(self.time_seconds, dtype=np.float64).reshape(shape)
        self.iterations = np.asarray(self.iterations, dtype=np.int64).reshape(shape)
        if [len(r) for r in self.statuses] != [shape[1]] * shape[0]:
            raise ValueError("statuses table has the wrong shape")
        solved = self.solved
        if np.any(solved & ~np.isfinite(self.time_seconds)):
            raise ValueError("solved cell without a finite time")
        if np.any(~solved & ~np.isnan(self.time_seconds)):
            raise ValueError("failed cell carries a time")

    @property
    def solved(self) -> np.ndarray:
        return np.array(
            [[s == Status.SOLUTION_FOUND.value for s in row] for row in self.statuses], dtype=bool
        ).reshape(len(self.problems), len(self.methods))

    @classmethod
    def from_times(cls, times, methods=None, problems=None) -> BenchResults:
        """Build from a plain table; ``None``/NaN/inf entries are failures."""
        t = np.array([[math.nan if v is None else v for v in row] for row in times], dtype=float)
        t[~np.isfinite(t)] = math.nan
        n_p, n_m = t.shape
        methods = list(methods or [f"method{j}" for j in range(n_m)])
        problems = list(problems or [f"p{i}" for i in range(n_p)])
        statuses = [
            [Status.SOLUTION_FOUND.value if np.isfinite(v) else Status.MAX_ITER.value for v in row]
            for row in t
        ]
        return cls(methods, problems, t, np.zeros_like(t, dtype=np.int64), statuses)


def lower_median(values: Sequence[float]) -> float:
    v = sorted(values)
    return v[(len(v) - 1) // 2]


def _run_cell(entry: SuiteEntry, method: str, repetitions: int, overrides: dict):
    cfg = SolverConfig(method=method, keep_iterates=False, **overrides)
    times = []
    report = None
    try:
        for _ in range(repetitions):
            t0 = time.perf_counter()
            report = solve(entry.problem, entry.x0, cfg)
            times.append(time.perf_counter() - t0)
    except Exception as exc:  # recorded as a failed cell
        return math.nan, 0, ERROR_STATUS, f"{type(exc).__name__}: {exc}"
    if not report.solved:
        return math.nan, report.iterations, report.status.value, ""
    return lower_median(times), report.iterations, report.status.value, ""


def _cell_job(args):
    return _run_cell(*args)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("AVE_SOLVE_JOBS", "1")))
    except ValueError:
        return 1


def run_suite(
    suite: Suite,
    methods: Sequence[str] = METHODS,
    repetitions: int = 10,
    jobs: Optional[int] = None,
    config: Optional[dict] = None,
) -> BenchResults:
    """Solve every suite member with every method from its manifest start.

    Each cell is run ``repetitions`` times in a row on one worker and timed by
    its lower median. Cells may be spread over ``jobs`` processes.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    overrides = dict(config or {})
    cells = [(e, m, repetitions, overrides) for e in suite.entries for m in methods]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_cell_job, cells))
    else:
        out = [_run_cell(*c) for c in cells]
    n_p, n_m = len(suite.entries), len(methods)
    t = np.array([o[0] for o in out]).reshape(n_p, n_m)
    it = np.array([o[1] for o in out]).reshape(n_p, n_m)
    st = [[out[i * n_m + j][2] for j in range(n_m)] for i in range(n_p)]
    return BenchResults(list(methods), [e.name for e in suite.entries], t, it, st)


# ---------------------------------------------------------------------------
# performance profiles


@dataclass
class ProfileCurve:
    method: str
    tau_breakpoints: np.ndarray
    rho_values: np.ndarray

    def rho(self, tau: float) -> float:
        """Right-continuous step function value at ``tau``."""
        i = np.searchsorted(self.tau_breakpoints, tau, side="right") - 1
        return 0.0 if i < 0 else float(self.rho_values[i])


@dataclass
class ProfileSummary:
    method: str
    efficiency: float   # fraction within (1 + window) of the fastest time
    robustness: float   # fraction solved
    fastest: float      # profile value at tau = 1 (strict minimum)


def performance_ratios(r: BenchResults) -> np.ndarray:
    t = np.where(r.solved, r.time_seconds, np.inf)
    best = t.min(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = t / best
    # best == 0 (timer resolution): zero times tie at 1, the rest are unbounded
    zero = (best == 0.0) & np.isfinite(t)
    ratios = np.where(zero, np.where(t == 0.0, 1.0, np.inf), ratios)
    ratios[~np.isfinite(ratios)] = np.inf
    return ratios


def performance_profile(r: BenchResults, efficiency_window: float = 0.05):
    """Profile curves on a common breakpoint grid plus per-method summaries."""
    if efficiency_window < 0:
        raise ValueError("efficiency_window must be nonnegative")
    if not r.problems or not r.methods:
        raise ValueError("empty results")
    ratios = performance_ratios(r)
    finite = ratios[np.isfinite(ratios)]
    grid = np.unique(np.concatenate([[1.0], finite]))
    n_p = len(r.problems)
    t = np.where(r.solved, r.time_seconds, np.inf)
    best = t.min(axis=1)
    curves, summaries = [], []
    for j, m in enumerate(r.methods):
        col = ratios[:, j]
        rho = np.array([np.count_nonzero(col <= tau) / n_p for tau in grid])
        curves.append(ProfileCurve(m, grid.copy(), rho))
        efficient = np.isfinite(t[:, j]) & (t[:, j] <= (1.0 + efficiency_window) * best)
        summaries.append(
            ProfileSummary(
                m,
                efficiency=np.count_nonzero(efficient) / n_p,
                robustness=np.count_nonzero(r.solved[:, j]) / n_p,
                fastest=float(rho[0]),
            )
        )
    return curves, summaries


# ---------------------------------------------------------------------------
# CSV artifacts


def _g17(v) -> str:
    return format(float(v), ".17g")


def write_results_csv(r: BenchResults, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["problem", "method", "status", "median_seconds", "iterations"])
        for i, p in enumerate(r.problems):
            for j, m in enumerate(r.methods):
                t = r.time_seconds[i, j]
                w.writerow([p, m, r.statuses[i][j], "" if np.isnan(t) else _g17(t),
                            int(r.iterations[i, j])])


def read_results_csv(path) -> BenchResults:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no result rows")
    problems = list(dict.fromkeys(row["problem"] for row in rows))
    methods = list(dict.fromkeys(row["method"] for row in rows))
    pi = {p: i for i, p in enumerate(problems)}
    mi = {m: j for j, m in enumerate(methods)}
    t = np.full((len(problems), len(methods)), math.nan)
    it = np.zeros_like(t, dtype=np.int64)
    st = [[ERROR_STATUS] * len(methods) for _ in problems]
    for row in rows:
        i, j = pi[row["problem"]], mi[row["method"]]
        st[i][j] = row["status"]
        t[i, j] = float(row["median_seconds"]) if row["median_seconds"] else math.nan
        it[i, j] = int(row["iterations"])
    return BenchResults(methods, problems, t, it, st)


def emit_profile_csv(curves: Sequence[ProfileCurve], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "tau", "rho"])
        for c in curves:
            for tau, rho in zip(c.tau_breakpoints, c.rho_values):
                w.writerow([c.method, _g17(tau), _g17(rho)])


def read_profile_csv(path) -> list[ProfileCurve]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    by_method: dict[str, list] = {}
    for row in rows:
        by_method.setdefault(row["method"], []).append((float(row["tau"]), float(row["rho"])))
    return [
        ProfileCurve(m, np.array([a for a, _ in pts]), np.array([b for _, b in pts]))
        for m, pts in by_method.items()
    ]


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def emit_summary(summaries: Sequence[ProfileSummary], path, efficiency_window=0.05) -> None:
    """Efficiency/robustness table in percent with one decimal."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(
            f"# wall-clock medians; efficiency = within {100 * efficiency_window:g}% "
            "of the fastest method\n"
        )
        w = csv.writer(fh)
        w.writerow(["method", "efficiency", "robustness"])
        for s in summaries:
            w.writerow([s.method, _pct(s.efficiency), _pct(s.robustness)])


def read_summary_csv(path) -> list[tuple[str, float, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [(r["method"], float(r["efficiency"]), float(r["robustness"]))
            for r in csv.DictReader(lines)]


def format_summary(summaries: Sequence[ProfileSummary]) -> str:
    width = max(len("method"), *(len(s.method) for s in summaries))
    lines = [f"{'method':<{width}}  efficiency(%)  robustness(%)  fastest(%)"]
    for s in summaries:
        lines.append(
            f"{s.method:<{width}}  {_pct(s.efficiency):>13}  {_pct(s.robustness):>13}  "
            f"{_pct(s.fastest):>10}"
        )
    return "\n".join(lines)
