"""Random AVE instances with prescribed singular values and planted solutions.

A matrix is built from ``diag(rc)`` by random Givens rotations applied
alternately from the left and from the right until the requested fraction of
nonzeros is reached. Rotations are orthogonal, so the singular values stay
exactly ``rc`` up to rounding.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import AveProblem, _fmt, load_problem, save_problem
from .exceptions import ProblemFormatError
from .linalg import CsrMatrix, spmv
from .rng import PortableRng
from .solver import THETA_SAFETY, global_theta_formula

MANIFEST = "manifest.json"
SUITE_VERSION = 1

_RC, _ROT, _XSTAR, _X0 = range(4)


@dataclass
class GeneratorSpec:
    """Parameters of one instance.

    ``rc_spread``, when given, replaces the uniform draw of singular values by
    a log-uniform one over ``[1/rc_spread, 1]`` with both ends attained, so
    ``cond(A) == rc_spread`` exactly.
    """

    n: int
    density: float
    seed: int
    sv_rescale: bool = True
    solution_range: tuple[float, float] = (-100.0, 100.0)
    rc_spread: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must lie in (0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        lo, hi = self.solution_range
        if not lo < hi:
            raise ValueError("solution_range must be an increasing interval")
        self.solution_range = (float(lo), float(hi))
        if self.rc_spread is not None and not self.rc_spread >= 1.0:
            raise ValueError("rc_spread must be >= 1")
        if self.density * self.n * self.n < self.n:
            warnings.warn(
                f"density {self.density} gives fewer than n nonzeros; "
                "the diagonal alone already exceeds it",
                stacklevel=2,
            )


@dataclass
class Instance:
    problem: AveProblem
    x0: np.ndarray
    achieved_density: float
    spec: GeneratorSpec


def singular_values(spec: GeneratorSpec, rng: PortableRng) -> np.ndarray:
    rc = rng.open01(spec.n)
    if spec.rc_spread is not None:
        rc = spec.rc_spread ** (-rc)
        if spec.n > 1:
            rc[np.argmin(rc)] = 1.0 / spec.rc_spread
            rc[np.argmax(rc)] = 1.0
    if spec.sv_rescale:
        u = rng.open01(1)[0]
        rc = rc * (3.0 / (u * rc.min()))
    return rc


def rotate_to_density(rc, density, rng: PortableRng, max_rotations=None):
    """Apply random plane rotations to ``diag(rc)`` until nnz/n^2 >= density.

    Returns the dense result and the number of rotations used.
    """
    n = rc.size
    m = np.diag(rc).astype(np.float64)
    target = math.ceil(density * n * n - 1e-9)
    nnz = n
    if max_rotations is None:
        max_rotations = 64 * n * n + 64
    used = 0
    block = 1024
    left = True
    while nnz < target and used < max_rotations and n > 1:
        ii = rng.integers(block, n)
        jj = rng.integers(block, n - 1)
        jj = jj + (jj >= ii)
        ang = rng.uniform(block, 0.0, 2.0 * math.pi)
        for i, j, a in zip(ii, jj, ang):
            c, s = math.cos(a), math.sin(a)
            if left:
                p, q = m[i].copy(), m[j].copy()
            else:
                p, q = m[:, i].copy(), m[:, j].copy()
            before = np.count_nonzero(p) + np.count_nonzero(q)
            np_, nq = c * p - s * q, s * p + c * q
            if left:
                m[i], m[j] = np_, nq
            else:
                m[:, i], m[:, j] = np_, nq
            nnz += np.count_nonzero(np_) + np.count_nonzero(nq) - before
            left = not left
            used += 1
            if nnz >= target or used >= max_rotations:
                break
    if nnz < target:
        warnings.warn(
            f"density {density} not reached (got {nnz / (n * n):.4g}); "
            "returning the densest matrix found",
            stacklevel=2,
        )
    return m, used


def generate_instance(spec: GeneratorSpec) -> Instance:
    rng = PortableRng(spec.seed)
    rc = singular_values(spec, rng.split(_RC))
    dense, _ = rotate_to_density(rc, spec.density, rng.split(_ROT))
    a = CsrMatrix.from_dense(dense)
    lo, hi = spec.solution_range
    x_star = rng.split(_XSTAR).uniform(spec.n, lo, hi)
    x0 = rng.split(_X0).uniform(spec.n, lo, hi)
    b = spmv(a, x_star) - np.abs(x_star)
    sv_min, sv_max = float(rc.min()), float(rc.max())
    theta = None
    if sv_min > 3.0:
        theta = THETA_SAFETY * global_theta_formula(sv_max, 1.0 / sv_min)
    problem = AveProblem(
        a, b, planted_solution=x_star, theta_hint=theta,
        sv_min=sv_min, sv_max=sv_max, seed=spec.seed,
    )
    return Instance(problem, x0, a.density, spec)


def generate(spec: GeneratorSpec) -> AveProblem:
    return generate_instance(spec).problem


def generate_suite(n, density, count, seed, **kwargs) -> list[Instance]:
    """``count`` instances with seeds ``seed, seed + 1, ...``."""
    return [generate_instance(GeneratorSpec(n, density, seed + i, **kwargs)) for i in range(count)]


# ---------------------------------------------------------------------------
# suites on disk


@dataclass
class SuiteEntry:
    name: str
    problem: AveProblem
    x0: np.ndarray
    seed: Optional[int] = None
    achieved_density: Optional[float] = None


@dataclass
class Suite:
    entries: list[SuiteEntry]
    generator_params: dict = field(default_factory=dict)
    version: int = SUITE_VERSION

    def __len__(self):
        return len(self.entries)


def dumps17(obj) -> str:
    """JSON text with every float written at 17 significant digits."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt(obj)
    if isinstance(obj, np.ndarray):
        return dumps17(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps17(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps17(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.generic):
        return dumps17(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_suite(instances, dir_path, generator_params=None) -> Path:
    """Write one problem file per instance plus ``manifest.json``.

    ``instances`` holds :class:`Instance` or :class:`SuiteEntry` objects.
    Returns the manifest path.
    """
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    rows = []
    params = dict(generator_params or {})
    for i, inst in enumerate(instances):
        if isinstance(inst, Instance):
            name = f"problem_{i:04d}.json"
            seed, dens = inst.spec.seed, inst.achieved_density
            if not params:
                params = {k: v for k, v in asdict(inst.spec).items() if k != "seed"}
        else:
            name, seed, dens = inst.name, inst.seed, inst.achieved_density
        p = inst.problem
        save_problem(p, d / name)
        rows.append({
            "file": name,
            "seed": seed,
            "x0": np.asarray(inst.x0, dtype=np.float64),
            "achieved_density": dens if dens is not None else p.a_matrix.density,
            "sv_min": p.sv_min,
            "sv_max": p.sv_max,
            "theta": p.theta_hint,
        })
    manifest = {"version": SUITE_VERSION, "generator_params": params, "instances": rows}
    path = d / MANIFEST
    path.write_text(dumps17(manifest) + "\n", encoding="utf-8")
    return path


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ProblemFormatError(f"missing in {where}", key)
    return obj[key]


def read_manifest(dir_path) -> dict:
    path = Path(dir_path) / MANIFEST
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON in {path}: {exc}") from None
    _require(manifest, "version", "manifest")
    instances = _require(manifest, "instances", "manifest")
    if not isinstance(instances, list):
        raise ProblemFormatError("expected a list", "instances")
    for i, row in enumerate(instances):
        where = f"instances[{i}]"
        _require(row, "file", where)
        x0 = _require(row, "x0", where)
        if not isinstance(x0, list):
            raise ProblemFormatError("expected an array", f"{where}.x0")
    return manifest


def read_suite(dir_path) -> Suite:
    d = Path(dir_path)
    manifest = read_manifest(d)
    entries = []
    for i, row in enumerate(manifest["instances"]):
        try:
            problem = load_problem(d / row["file"])
        except ProblemFormatError as exc:
            raise ProblemFormatError(f"{row['file']}: {exc}", exc.field) from None
        x0 = np.array(row["x0"], dtype=np.float64)
        if x0.shape != (problem.n,):
            raise ProblemFormatError(f"length {x0.size} != n = {problem.n}", f"instances[{i}].x0")
        entries.append(
            SuiteEntry(row["file"], problem, x0, row.get("seed"), row.get("achieved_density"))
        )
    return Suite(entries, manifest.get("generator_params", {}), manifest["version"])


def manifest_x0_for(problem_path) -> Optional[np.ndarray]:
    """The manifest start point of a suite member, or None if not in a suite."""
    path = Path(problem_path)
    if not (path.parent / MANIFEST).exists():
        return None
    try:
        manifest = read_manifest(path.parent)
    except (ProblemFormatError, OSError):
        return None
    for row in manifest["instances"]:
        if os.path.basename(row["file"]) == path.name:
            return np.array(row["x0"], dtype=np.float64)
    return None
