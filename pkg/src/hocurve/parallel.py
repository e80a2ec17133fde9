"""Distribute whole curves or single elements over worker processes.

Tasks are split into contiguous static blocks, one block per worker, and
every worker runs its block serially. Results come back to the parent and
are merged in task order, so the output never depends on the worker count.
"""

from __future__ import annotations

import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import CurveSpec, is_straight
from .mesh import DofLayout, ParametricMesh, PhysicalMesh, interpolate_meshes, make_partition
from .optimizer import Config, OptimizeReport, merge_elements, optimize, optimize_elements, preoptimize_linear

MODES = ("by_curve", "by_element")


@dataclass(frozen=True)
class WorkPlan:
    mode: str
    tasks: tuple  # by_curve: curve indices; by_element: element indices
    workers: int

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def effective_workers(self) -> int:
        return max(1, min(self.workers, len(self.tasks)))

    def blocks(self) -> list:
        """Contiguous task blocks, one per effective worker."""
        if not self.tasks:
            return []
        return [tuple(b.tolist()) for b in np.array_split(np.asarray(self.tasks), self.effective_workers)]


@dataclass(frozen=True)
class MeshParams:
    p: int = 2
    q: Optional[int] = None  # None -> 2p - 1
    R: int = 4
    layout: str = "constrained"
    partition: str = "arclength"  # uniform | arclength | preoptimize

    @property
    def q_eff(self) -> int:
        return self.q if self.q is not None else 2 * self.p - 1


@dataclass
class CurveResult:
    name: str
    x: Optional[PhysicalMesh]
    s: Optional[ParametricMesh]
    report: Optional[OptimizeReport]
    error: str = ""
    seconds: float = 0.0


@dataclass
class ParallelReport:
    mode: str
    workers: int
    effective_workers: int
    task_reports: list = field(default_factory=list)
    task_seconds: list = field(default_factory=list)
    wall_time: float = 0.0
    serial_time: Optional[float] = None
    worker_iterations: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (task label, message)
    excluded: list = field(default_factory=list)
    results: list = field(default_factory=list)
    x: Optional[PhysicalMesh] = None  # merged meshes, by_element only
    s: Optional[ParametricMesh] = None

    @property
    def speedup(self) -> Optional[float]:
        if self.serial_time is None or self.wall_time <= 0:
            return None
        return self.serial_time / self.wall_time

    @property
    def histogram(self) -> list:
        """Iterations per worker, the load each static block carried."""
        return list(self.worker_iterations)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "workers": self.workers,
            "effective_workers": self.effective_workers,
            "wall_time": self.wall_time,
            "serial_time": self.serial_time,
            "speedup": self.speedup,
            "worker_iterations": list(self.worker_iterations),
            "task_iterations": [r.iterations if r is not None else None for r in self.task_reports],
            "task_seconds": list(self.task_seconds),
            "failures": [list(f) for f in self.failures],
            "excluded": list(self.excluded),
        }


# ---------------------------------------------------------------------------
# task bodies (module level so they pickle)


def solve_curve(curve: CurveSpec, params: MeshParams, config: Config) -> CurveResult:
    """Partition, interpolate and optimize one curve."""
    t0 = time.perf_counter()
    try:
        if params.partition == "preoptimize":
            part = preoptimize_linear(curve, params.R, config)
        else:
            part = make_partition(curve, params.R, params.partition)
        x, s = interpolate_meshes(curve, params.R, params.p, params.q_eff, part)
        layout = DofLayout(params.layout, params.R, params.p, params.q_eff)
        xo, so, rep = optimize(curve, x, s, layout, config)
        return CurveResult(curve.name, xo, so, rep, "", time.perf_counter() - t0)
    except Exception as exc:  # one bad curve must not stop the others
        return CurveResult(curve.name, None, None, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0)


def _curve_block(curves, params, config):
    return [solve_curve(c, p, config) for c, p in zip(curves, params)]


def _element_block(curve, x, s, elements, config):
    out = []
    for e in elements:
        t0 = time.perf_counter()
        try:
            res = optimize_elements(curve, x, s, [e], config)[0]
            out.append((e, res[1], res[2], res[3], "", time.perf_counter() - t0))
        except Exception as exc:
            out.append((e, None, None, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0))
    return out


def _context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else methods[0])


def _run_blocks(fn, jobs, workers):
    """Run fn(*job) for each job; one process per job unless workers == 1."""
    if workers == 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=len(jobs), mp_context=_context()) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------


def _by_curves_once(curves, params, config, workers):
    plan = WorkPlan("by_curve", tuple(range(len(curves))), workers)
    blocks = plan.blocks()
    jobs = [([curves[i] for i in b], [params[i] for i in b], config) for b in blocks]
    t0 = time.perf_counter()
    outs = _run_blocks(_curve_block, jobs, plan.effective_workers)
    wall = time.perf_counter() - t0
    return plan, blocks, outs, wall


def run_by_curves(
    specs: Sequence[CurveSpec],
    mesh_params,
    config: Optional[Config] = None,
    workers: int = 1,
    serial_baseline: bool = False,
) -> ParallelReport:
    """Optimize each curve as one task; straight lines are skipped.

    ``mesh_params`` is one MeshParams for all curves or a list matching
    ``specs``.
    """
    config = config or Config()
    if isinstance(mesh_params, MeshParams):
        mesh_params = [mesh_params] * len(specs)
    if len(mesh_params) != len(specs):
        raise ValueError("need one MeshParams per curve")
    keep, params, excluded = [], [], []
    for c, mp_ in zip(specs, mesh_params):
        if is_straight(c):
            excluded.append(c.name)
        else:
            keep.append(c)
            params.append(mp_)

    plan, blocks, outs, wall = _by_curves_once(keep, params, config, workers)
    rep = ParallelReport("by_curve", workers, plan.effective_workers, wall_time=wall, excluded=excluded)
    for block_out in outs:
        its = 0
        for r in block_out:
            rep.results.append(r)
            rep.task_reports.append(r.report)
            rep.task_seconds.append(r.seconds)
            if r.error:
                rep.failures.append((r.name, r.error))
            else:
                its += r.report.iterations
        rep.worker_iterations.append(its)
    if serial_baseline:
        rep.serial_time = _by_curves_once(keep, params, config, 1)[3]
    return rep


def _by_elements_once(curve, x, s, config, workers):
    plan = WorkPlan("by_element", tuple(range(x.n_elements)), workers)
    blocks = plan.blocks()
    jobs = [(curve, x, s, b, config) for b in blocks]
    t0 = time.perf_counter()
    outs = _run_blocks(_element_block, jobs, plan.effective_workers)
    wall = time.perf_counter() - t0
    return plan, outs, wall


def run_by_elements(
    curve: CurveSpec,
    x: PhysicalMesh,
    s: ParametricMesh,
    config: Optional[Config] = None,
    workers: int = 1,
    serial_baseline: bool = False,
) -> ParallelReport:
    """Constrained optimization with elements spread over workers.

    The merged meshes equal ``optimize_constrained_per_element`` bitwise.
    """
    config = config or Config()
    plan, outs, wall = _by_elements_once(curve, x, s, config, workers)
    rep = ParallelReport("by_element", workers, plan.effective_workers, wall_time=wall)
    merged = []
    for block_out in outs:
        its = 0
        for e, xn, sn, r, err, sec in block_out:
            rep.task_reports.append(r)
            rep.task_seconds.append(sec)
            if err:
                rep.failures.append((f"element {e}", err))
                continue
            its += r.iterations
            merged.append((e, xn, sn, r))
        rep.worker_iterations.append(its)
    rep.x, rep.s = merge_elements(x, s, merged)
    if serial_baseline:
        rep.serial_time = _by_elements_once(curve, x, s, config, 1)[2]
    return rep
