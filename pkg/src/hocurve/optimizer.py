"""Globalized Newton with a nonmonotone line search and a log barrier.

``optimize`` runs up to ``outer_passes`` barrier passes. The barrier weight
starts at zero and stays there until an accepted step tangles the
parametric mesh; the step is then undone, mu is set to the current
disparity and each following pass shrinks it by ``mu_shrink``.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .disparity import DisparityOperator, Problem
from .geometry import CurveSpec
from .mesh import DofLayout, ParametricMesh, PhysicalMesh, interpolate_meshes, uniform_partition


@dataclass
class Config:
    tol: float = 1e-12
    max_iter: int = 200
    outer_passes: int = 6
    mu_shrink: float = 1e-2
    sigma1: float = 1e-4
    sigma2: float = 0.9
    eta: float = 1.0
    max_halvings: int = 50
    oversample: Optional[int] = None  # default 10*(q+1)
    barrier: bool = True  # False: tangled steps are counted but accepted (diagnostics)

    def __post_init__(self):
        if not 0 < self.sigma1 < self.sigma2 < 1:
            raise ValueError("need 0 < sigma1 < sigma2 < 1")
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")
        if not 0 < self.mu_shrink < 1:
            raise ValueError("mu_shrink must lie in (0, 1)")
        if self.tol <= 0 or self.max_iter < 1 or self.outer_passes < 1 or self.max_halvings < 0:
            raise ValueError("tol, max_iter, outer_passes and max_halvings must be positive")

    def oversample_for(self, q: int) -> int:
        return self.oversample if self.oversample is not None else 10 * (q + 1)


@dataclass
class OptimizeReport:
    converged: bool = False
    iterations: int = 0
    line_search_count: int = 0
    barrier_activations: int = 0
    E_initial: float = np.nan
    E_final: float = np.nan
    grad_norm_final: float = np.nan
    wall_time: float = 0.0
    mu_final: float = 0.0
    passes: int = 0
    halvings: int = 0
    curvature_failures: int = 0
    invalid_iterates: int = 0  # accepted tangled steps, barrier-disabled runs only
    failure: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LineSearchState:
    """Zhang-Hager reference value C and weight Q."""

    C: float
    Q: float = 1.0

    @classmethod
    def start(cls, E0: float) -> "LineSearchState":
        return cls(float(E0), 1.0)


def zh_update(state: LineSearchState, eta: float, E_new: float) -> LineSearchState:
    Q = eta * state.Q + 1.0
    C = (eta * state.Q * state.C + E_new) / Q
    return LineSearchState(C, Q)


class LineSearchFailure(RuntimeError):
    def __init__(self, halvings):
        super().__init__(f"no acceptable step after {halvings} halvings")
        self.halvings = halvings


@dataclass
class LineSearchResult:
    alpha: float
    z: np.ndarray
    value: float
    halvings: int


def descent_direction(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """Newton step if it descends, else diagonally scaled steepest descent."""
    try:
        delta = np.linalg.solve(hess, -grad)
        if np.all(np.isfinite(delta)) and delta @ grad < 0:
            return delta
    except np.linalg.LinAlgError:
        pass
    diag = np.maximum(np.abs(np.diag(hess)), 1e-12)
    delta = -grad / diag
    if delta @ grad < 0:
        return delta
    return -grad


def line_search(objective: Callable, z, direction, grad, state: LineSearchState, config: Config) -> LineSearchResult:
    """Backtrack from alpha = 1 until f(z + alpha d) <= C + sigma1 alpha g.d."""
    slope = float(grad @ direction)
    alpha = 1.0
    for h in range(config.max_halvings + 1):
        trial = z + alpha * direction
        val = objective(trial)
        if val <= state.C + config.sigma1 * alpha * slope:
            return LineSearchResult(alpha, trial, val, h)
        alpha *= 0.5
    raise LineSearchFailure(config.max_halvings)


def minimize_operator(op: DisparityOperator, z0: np.ndarray, config: Config, report: OptimizeReport):
    """Core loop on a flat nodal vector; fixed entries are never written."""
    free = op.free_index
    oversample = config.oversample_for(op.q)
    z = z0.copy()
    mu = 0.0
    activated = False
    converged = False

    def objective_free(v):
        zz = z.copy()
        zz[free] = v
        return op.objective(zz, mu)

    for _ in range(config.outer_passes):
        mu *= config.mu_shrink
        report.passes += 1
        activated = False
        converged = False
        state = None
        prev = None  # (slope, direction) of the last accepted step
        for _ in range(config.max_iter):
            P, E, B, g, H = op.assemble(z, mu, 2)
            gnorm = float(np.linalg.norm(g))
            report.grad_norm_final = gnorm
            if prev is not None and g @ prev[1] < config.sigma2 * prev[0]:
                report.curvature_failures += 1
            if state is None:
                state = LineSearchState.start(P)
            if gnorm < config.tol:
                converged = True
                break
            if g.size == 0:
                converged = True
                break
            d = descent_direction(g, H)
            report.iterations += 1
            try:
                ls = line_search(objective_free, z[free], d, g, state, config)
            except LineSearchFailure as exc:
                report.line_search_count += exc.halvings + 1
                report.halvings += exc.halvings
                report.failure = "line_search"
                report.mu_final = mu
                return z, False
            report.line_search_count += ls.halvings + 1
            report.halvings += ls.halvings
            trial = z.copy()
            trial[free] = ls.z
            if not op.is_valid(trial, oversample):
                if config.barrier:
                    mu = op.energy(z)
                    activated = True
                    report.barrier_activations += 1
                    break
                report.invalid_iterates += 1
            prev = (float(g @ d), d)
            z = trial
            state = zh_update(state, config.eta, ls.value)
        if not activated:
            break
    report.mu_final = mu
    if not converged and not report.failure:
        report.failure = "barrier_active" if activated else "max_iter"
    return z, converged


def optimize(curve: CurveSpec, x: PhysicalMesh, s: ParametricMesh, layout: DofLayout, config: Optional[Config] = None):
    """Minimize the disparity over the free nodes of ``layout``.

    Returns ``(x_out, s_out, report)``; the inputs are not modified.
    """
    config = config or Config()
    problem = Problem(curve, x, s, layout)
    op = problem.operator
    z0 = problem.z_full()
    if not op.is_valid(z0, config.oversample_for(s.degree)):
        raise ValueError("initial parametric mesh is not valid")
    report = OptimizeReport()
    report.E_initial = op.energy(z0)
    t0 = time.perf_counter()
    z, converged = minimize_operator(op, z0, config, report)
    report.wall_time = time.perf_counter() - t0
    report.converged = converged
    report.E_final = op.energy(z)
    x_out, s_out = op.unpack(z, x, s)
    return x_out, s_out, report


def element_meshes(x: PhysicalMesh, s: ParametricMesh, e: int):
    """Stand-alone single-element copies of element ``e``."""
    xe = PhysicalMesh(x.degree, 1, x.element_nodes()[e].copy(), x.node_family)
    se = ParametricMesh(s.degree, 1, s.element_nodes()[e].copy(), s.sigma_dir, s.node_family)
    return xe, se


def optimize_elements(curve, x, s, elements, config):
    """Constrained optimization of the listed elements, one at a time."""
    out = []
    layout = DofLayout.constrained(1, x.degree, s.degree)
    for e in elements:
        xe, se = element_meshes(x, s, e)
        xo, so, rep = optimize(curve, xe, se, layout, config)
        out.append((e, xo.nodes, so.nodes, rep))
    return out


def merge_elements(x, s, results):
    """Write per-element interior nodes back into copies of the meshes."""
    xo, so = x.copy(), s.copy()
    xi, si = x.element_index(), s.element_index()
    for e, xn, sn, _ in results:
        xo.nodes[xi[e, 1:-1]] = xn[1:-1]
        so.nodes[si[e, 1:-1]] = sn[1:-1]
    return xo, so


def optimize_constrained_per_element(curve, x, s, config: Optional[Config] = None):
    """Run the constrained problem as R independent single-element problems."""
    config = config or Config()
    results = optimize_elements(curve, x, s, range(x.n_elements), config)
    xo, so = merge_elements(x, s, results)
    return xo, so, [r[3] for r in results]


def preoptimize_linear(curve: CurveSpec, R: int, config: Optional[Config] = None, partition=None):
    """Element breakpoints from the unconstrained linear (p = q = 1) optimum."""
    config = config or Config()
    if partition is None:
        partition = uniform_partition(curve, R)
    if R == 1:
        return np.asarray(partition, dtype=float).copy()
    x, s = interpolate_meshes(curve, R, 1, 1, partition)
    _, s_out, _ = optimize(curve, x, s, DofLayout.unconstrained(R, 1, 1), config)
    return s_out.nodes.copy()
