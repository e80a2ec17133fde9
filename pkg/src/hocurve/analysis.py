"""Convergence-rate studies, root counts and the synthetic curve suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .disparity import count_roots, count_zero_runs, decompose_error
from .geometry import CurveSpec, bspline, circle, naca4, spiral
from .mesh import DofLayout, interpolate_meshes, make_partition
from .optimizer import Config, optimize
from .parallel import MeshParams, run_by_curves

# The study stop tolerance sits below the default so that fine p = 4 cells
# are not frozen at tol**0.5 ~ 1e-6 of relative accuracy; see FLOOR.
STUDY_CONFIG = Config(tol=1e-14)
FLOOR = 1e-13  # cells with sqrt(E) below this are left out of the fits
FIT_LAST = 4
MIN_FIT = 3


class StudyError(ValueError):
    pass


def fit_slope(log_sizes, log_errors) -> float:
    """Least-squares slope of log error against log element count."""
    xs = np.asarray(log_sizes, dtype=float)
    ys = np.asarray(log_errors, dtype=float)
    ok = np.isfinite(xs) & np.isfinite(ys)
    if ok.sum() < 2:
        raise StudyError("need at least two finite points to fit a slope")
    return float(np.polyfit(xs[ok], ys[ok], 1)[0])


def fitted_order(R, values, last: int = FIT_LAST, floor: float = FLOOR) -> float:
    """Negated slope over the last ``last`` usable refinements, NaN if < 3."""
    R = np.asarray(R, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = np.isfinite(v) & (v >= floor)
    R, v = R[ok][-last:], v[ok][-last:]
    if len(R) < MIN_FIT:
        return math.nan
    return -fit_slope(np.log(R), np.log(v))


@dataclass
class StudyCell:
    p: int
    q: int
    R: int
    layout: str
    disparity_initial: float
    disparity_opt: float
    converged: bool
    iterations: int
    failed: bool = False
    error: str = ""


@dataclass
class ConvergenceStudy:
    curve: str
    ps: list
    Rs: list
    layout: str
    partition: str
    cells: list = field(default_factory=list)

    def series(self, p: int, which: str = "opt"):
        cells = sorted((c for c in self.cells if c.p == p and not c.failed), key=lambda c: c.R)
        R = [c.R for c in cells]
        key = "disparity_opt" if which == "opt" else "disparity_initial"
        return R, [getattr(c, key) for c in cells]

    def order(self, p: int, which: str = "opt") -> float:
        return fitted_order(*self.series(p, which))

    @property
    def orders(self) -> dict:
        return {p: {"initial": self.order(p, "initial"), "optimized": self.order(p, "opt")} for p in self.ps}

    def rows(self):
        for c in sorted(self.cells, key=lambda c: (c.p, c.R)):
            yield (self.curve, c.p, c.q, c.layout, c.R, c.disparity_initial, c.disparity_opt)

    def to_dict(self) -> dict:
        return {
            "curve": self.curve,
            "layout": self.layout,
            "partition": self.partition,
            "R": list(self.Rs),
            "orders": {str(p): v for p, v in self.orders.items()},
            "failed_cells": [[c.p, c.R, c.error] for c in self.cells if c.failed],
            "unconverged_cells": [[c.p, c.R] for c in self.cells if not c.failed and not c.converged],
        }


def run_study(
    curve: CurveSpec,
    ps: Sequence[int],
    Rs: Sequence[int],
    layout: str = "constrained",
    config: Optional[Config] = None,
    partition: str = "arclength",
    q=None,
    workers: int = 1,
) -> ConvergenceStudy:
    """sqrt(E) before and after optimization on every (p, R) cell.

    ``q`` is None for the 2p - 1 rule, an int, or a callable p -> q.
    """
    Rs = [int(r) for r in Rs]
    if any(b <= a for a, b in zip(Rs, Rs[1:])):
        raise StudyError("refinements must be strictly increasing")
    config = config or STUDY_CONFIG
    params = []
    for p in ps:
        qq = q(p) if callable(q) else (q if q is not None else 2 * p - 1)
        params += [MeshParams(p, qq, R, layout, partition) for R in Rs]
    rep = run_by_curves([curve] * len(params), params, config, workers)
    study = ConvergenceStudy(curve.name, list(ps), Rs, layout, partition)
    if rep.excluded:
        raise StudyError(f"curve {curve.name!r} is a straight line; nothing to converge")
    for mp_, res in zip(params, rep.results):
        if res.error:
            study.cells.append(StudyCell(mp_.p, mp_.q_eff, mp_.R, layout, math.nan, math.nan, False, 0, True, res.error))
            continue
        r = res.report
        study.cells.append(
            StudyCell(mp_.p, mp_.q_eff, mp_.R, layout, math.sqrt(r.E_initial), math.sqrt(r.E_final), r.converged, r.iterations)
        )
    return study


# ---------------------------------------------------------------------------


@dataclass
class RootStudy:
    curve: str
    p: int
    q: int
    initial_abs: int  # zero runs of |e| for the interpolating mesh
    tangent: int
    normal: int
    binormal: Optional[int]
    converged: bool
    E_initial: float
    E_final: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_root_study(
    curve: CurveSpec,
    p: int,
    q: int,
    config: Optional[Config] = None,
    samples: int = 2000,
    zero_band=None,
    R: int = 1,
    layout: str = "constrained",
):
    """Optimize, decompose the error on the Frenet frame and count roots.

    The local study uses one element (the default). Returns
    ``(RootStudy, initial decomposition, optimized decomposition)``.
    """
    config = config or STUDY_CONFIG
    x, s = interpolate_meshes(curve, R, p, q, make_partition(curve, R, "arclength"))
    d0 = decompose_error(curve, x, s, samples)
    xo, so, rep = optimize(curve, x, s, DofLayout(layout, R, p, q), config)
    d1 = decompose_error(curve, xo, so, samples)
    res = RootStudy(
        curve.name,
        p,
        q,
        count_zero_runs(d0.abs_e, zero_band),
        count_roots(d1.e_t, zero_band),
        count_roots(d1.e_n, zero_band),
        None if d1.e_b is None else count_roots(d1.e_b, zero_band),
        rep.converged,
        rep.E_initial,
        rep.E_final,
    )
    return res, d0, d1


# ---------------------------------------------------------------------------


def _smooth_bspline(rng, name):
    """Quartic or quintic with wandering control points and uneven knots.

    Uneven interior knots keep the spline from being a single polynomial on
    any element of a uniform or arc-length partition.
    """
    k = int(rng.integers(4, 6))
    m = int(rng.integers(k + 3, k + 6))
    xs = np.cumsum(rng.uniform(0.6, 1.4, m))
    ys = np.cumsum(rng.normal(0.0, 0.5, m))
    P = np.stack([xs - xs[0], ys - ys[0]], axis=1)
    if rng.random() < 0.3:
        P = np.concatenate([P, np.cumsum(rng.normal(0, 0.3, m))[:, None]], axis=1)
    inner = np.sort(rng.uniform(0.05, 0.95, m - k - 1))
    U = np.concatenate([np.zeros(k + 1), inner, np.ones(k + 1)])
    return bspline(P, U, k, name=name)


def synthetic_suite(n: int = 20, seed: int = 0) -> list:
    """Deterministic mix of circles, spirals, NACA profiles and B-splines."""
    rng = np.random.default_rng(seed)
    codes = ["0012", "2412", "0015", "4412", "0009", "2415"]
    out = []
    for i in range(n):
        kind = i % 4
        if kind == 0:
            r = float(rng.uniform(0.5, 2.0))
            lo = float(rng.uniform(0, np.pi))
            span = float(rng.uniform(np.pi / 2, 2 * np.pi))
            out.append(circle(r, (lo, lo + span), name=f"circle_{i}"))
        elif kind == 1:
            out.append(spiral(float(rng.uniform(0.5, 2.0)), float(rng.uniform(1.0, 3.0)), name=f"spiral_{i}"))
        elif kind == 2:
            code = codes[int(rng.integers(len(codes)))]
            out.append(naca4(code, chord=float(rng.uniform(0.5, 2.0)), name=f"naca{code}_{i}"))
        else:
            out.append(_smooth_bspline(rng, f"bspline_{i}"))
    return out


def suite_comparison(curves, p: int, R: int, config: Optional[Config] = None, partition="arclength", workers=1):
    """Constrained and unconstrained runs over the same curves."""
    config = config or Config()
    out = {}
    for layout in ("constrained", "unconstrained"):
        rep = run_by_curves(curves, MeshParams(p, None, R, layout, partition), config, workers)
        out[layout] = rep
    return out


def mean_reduction(rep) -> float:
    """Mean over curves of 1 - sqrt(E_final / E_initial)."""
    vals = [1.0 - math.sqrt(r.report.E_final / r.report.E_initial) for r in rep.results if not r.error and r.report.E_initial > 0]
    return float(np.mean(vals)) if vals else math.nan
