"""Reference element, nodal bases, quadrature and the two curve meshes.

Both meshes store interface nodes once: element ``e`` of a degree-p mesh
owns global nodes ``e*p .. e*p + p``, so neighbours share node ``e*p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy import optimize

from .geometry import CurveError, CurveSpec

NODE_FAMILIES = ("gauss_lobatto", "equispaced")


class MeshError(ValueError):
    pass


# ---------------------------------------------------------------------------
# bases and quadrature


@lru_cache(maxsize=None)
def _lobatto_nodes(degree: int) -> np.ndarray:
    if degree == 1:
        return np.array([-1.0, 1.0])
    # interior nodes: roots of P'_degree, polished by Newton on P'
    dP = legendre.Legendre.basis(degree).deriv()
    ddP = dP.deriv()
    x = np.sort(dP.roots().real)
    for _ in range(3):
        x = x - dP(x) / ddP(x)
    x = 0.5 * (x - x[::-1])  # enforce exact symmetry
    return np.concatenate([[-1.0], x, [1.0]])


@dataclass(frozen=True)
class LagrangeBasis:
    """Lagrange basis on [-1, 1], evaluated by barycentric interpolation."""

    degree: int
    nodes: np.ndarray
    family: str = "gauss_lobatto"

    @property
    def bary_weights(self) -> np.ndarray:
        x = self.nodes
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        return 1.0 / np.prod(diff, axis=1)

    def diff_matrix(self) -> np.ndarray:
        """D[i, j] = N_j'(node_i)."""
        x, w = self.nodes, self.bary_weights
        n = len(x)
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    D[i, j] = (w[j] / w[i]) / (x[i] - x[j])
            D[i, i] = -np.sum(D[i])
        return D

    def __call__(self, xi):
        """Values and first derivatives, each of shape (len(xi), degree+1)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        x, w = self.nodes, self.bary_weights
        diff = xi[:, None] - x[None, :]
        exact = diff == 0.0
        hit = exact.any(axis=1)
        safe = np.where(exact, 1.0, diff)
        terms = w / safe
        vals = terms / terms.sum(axis=1, keepdims=True)
        inv = 1.0 / safe
        # l_i' = l_i * sum_{k != i} 1/(xi - x_k). The sum leaving out the
        # nearest node is formed directly; subtracting its huge term from
        # the full sum would cancel everything else when xi is close to it.
        rows = np.arange(len(xi))
        near = np.argmin(np.abs(diff), axis=1)
        inv_near = inv[rows, near]
        rest = np.sum(np.where(np.arange(len(x))[None, :] == near[:, None], 0.0, inv), axis=1)
        others = rest[:, None] + inv_near[:, None] - inv
        others[rows, near] = rest
        ders = vals * others
        if hit.any():
            D = self.diff_matrix()
            rows = np.nonzero(hit)[0]
            node = np.argmax(exact[rows], axis=1)
            vals[rows] = 0.0
            vals[rows, node] = 1.0
            ders[rows] = D[node]
        return vals, ders


def make_basis(degree: int, node_family: str = "gauss_lobatto") -> LagrangeBasis:
    if int(degree) < 1:
        raise MeshError(f"basis degree must be >= 1, got {degree}")
    degree = int(degree)
    if node_family == "gauss_lobatto":
        nodes = _lobatto_nodes(degree)
    elif node_family == "equispaced":
        nodes = np.linspace(-1.0, 1.0, degree + 1)
    else:
        raise MeshError(f"unknown node family {node_family!r}")
    return LagrangeBasis(degree, nodes, node_family)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.points)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadratureRule:
    if not 1 <= int(n) <= 128:
        raise MeshError(f"Gauss-Legendre order must be in [1, 128], got {n}")
    x, w = legendre.leggauss(int(n))
    return QuadratureRule(x, w)


def default_quadrature_order(p: int, q: int) -> int:
    return max(20, 2 * (p + q) + 2)


# ---------------------------------------------------------------------------
# meshes


@dataclass
class PhysicalMesh:
    """Piecewise degree-p map from reference elements into R^n."""

    degree: int
    n_elements: int
    nodes: np.ndarray  # (R*p + 1, n)
    node_family: str = "gauss_lobatto"

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.shape[0] != self.n_elements * self.degree + 1:
            raise MeshError("physical node count must be R*p + 1")

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def basis(self) -> LagrangeBasis:
        return make_basis(self.degree, self.node_family)

    def element_index(self) -> np.ndarray:
        return np.arange(self.n_elements)[:, None] * self.degree + np.arange(self.degree + 1)

    def element_nodes(self) -> np.ndarray:
        return self.nodes[self.element_index()]

    def evaluate(self, xi):
        """Positions and xi-derivatives, shape (R, len(xi), n)."""
        N, dN = self.basis(xi)
        X = self.element_nodes()
        return np.einsum("ki,eic->ekc", N, X), np.einsum("ki,eic->ekc", dN, X)

    def copy(self) -> "PhysicalMesh":
        return PhysicalMesh(self.degree, self.n_elements, self.nodes.copy(), self.node_family)


@dataclass
class ParametricMesh:
    """Piecewise degree-q scalar map into the curve parameter interval."""

    degree: int
    n_elements: int
    nodes: np.ndarray  # (R*q + 1,)
    sigma_dir: int = 1
    node_family: str = "gauss_lobatto"

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.shape != (self.n_elements * self.degree + 1,):
            raise MeshError("parametric node count must be R*q + 1")
        if self.sigma_dir not in (1, -1):
            raise MeshError("sigma_dir must be +1 or -1")

    @property
    def basis(self) -> LagrangeBasis:
        return make_basis(self.degree, self.node_family)

    def element_index(self) -> np.ndarray:
        return np.arange(self.n_elements)[:, None] * self.degree + np.arange(self.degree + 1)

    def element_nodes(self) -> np.ndarray:
        return self.nodes[self.element_index()]

    @property
    def interfaces(self) -> np.ndarray:
        return self.nodes[:: self.degree].copy()

    def evaluate(self, xi):
        """s and s' at reference points, shape (R, len(xi))."""
        N, dN = self.basis(xi)
        S = self.element_nodes()
        return S @ N.T, S @ dN.T

    def copy(self) -> "ParametricMesh":
        return ParametricMesh(self.degree, self.n_elements, self.nodes.copy(), self.sigma_dir, self.node_family)


@dataclass(frozen=True)
class DofLayout:
    """Which nodes are fixed during optimization.

    ``constrained`` fixes every element interface (x_0, x_p, s_0, s_q);
    ``unconstrained`` fixes only the two curve endpoints.
    """

    mode: str
    n_elements: int
    p: int
    q: int

    def __post_init__(self):
        if self.mode not in ("constrained", "unconstrained"):
            raise MeshError(f"unknown layout {self.mode!r}")

    @classmethod
    def constrained(cls, R, p, q):
        return cls("constrained", R, p, q)

    @classmethod
    def unconstrained(cls, R, p, q):
        return cls("unconstrained", R, p, q)

    def _free_nodes(self, deg: int) -> np.ndarray:
        free = np.ones(self.n_elements * deg + 1, dtype=bool)
        if self.mode == "constrained":
            free[::deg] = False
        else:
            free[[0, -1]] = False
        return free

    @property
    def physical_free(self) -> np.ndarray:
        return self._free_nodes(self.p)

    @property
    def parametric_free(self) -> np.ndarray:
        return self._free_nodes(self.q)

    def element_physical_mask(self) -> np.ndarray:
        idx = np.arange(self.n_elements)[:, None] * self.p + np.arange(self.p + 1)
        return self.physical_free[idx]

    def element_parametric_mask(self) -> np.ndarray:
        idx = np.arange(self.n_elements)[:, None] * self.q + np.arange(self.q + 1)
        return self.parametric_free[idx]


# ---------------------------------------------------------------------------
# construction


def _check_partition(curve: CurveSpec, partition) -> np.ndarray:
    t = np.asarray(partition, dtype=float)
    if t.ndim != 1 or len(t) < 2:
        raise MeshError("partition needs at least two breakpoints")
    d = np.diff(t)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise MeshError("partition must be strictly monotone")
    lo, hi = curve.domain
    ends = sorted((t[0], t[-1]))
    if abs(ends[0] - lo) > 1e-12 * max(1.0, abs(lo)) or abs(ends[1] - hi) > 1e-12 * max(1.0, abs(hi)):
        raise MeshError("partition must span the curve domain")
    return t


def interpolate_meshes(curve: CurveSpec, R: int, p: int, q: int, partition=None, node_family="gauss_lobatto"):
    """Interpolatory initial meshes: s affine per element and x_i = a(s_i)."""
    if R < 1 or p < 1 or q < 1:
        raise MeshError("R, p and q must be >= 1")
    if partition is None:
        partition = uniform_partition(curve, R)
    t = _check_partition(curve, partition)
    if len(t) != R + 1:
        raise MeshError(f"partition must have R + 1 = {R + 1} breakpoints")

    def fill(deg):
        ref = make_basis(deg, node_family).nodes
        lo, hi = t[:-1, None], t[1:, None]
        vals = lo + 0.5 * (ref[None, :] + 1.0) * (hi - lo)  # (R, deg+1)
        out = np.empty(R * deg + 1)
        out[:-1] = vals[:, :-1].ravel()
        out[-1] = t[-1]
        out[::deg] = t  # interfaces exactly on the breakpoints
        return out

    s_nodes = fill(q)
    sigma = 1 if t[-1] > t[0] else -1
    s = ParametricMesh(q, R, s_nodes, sigma, node_family)
    xs_param = fill(p)
    x = PhysicalMesh(p, R, curve.evaluate(np.clip(xs_param, *curve.domain))[0], node_family)
    return x, s


def uniform_partition(curve: CurveSpec, R: int) -> np.ndarray:
    if R < 1:
        raise MeshError("R must be >= 1")
    lo, hi = curve.domain
    t = np.linspace(lo, hi, R + 1)
    t[0], t[-1] = lo, hi
    return t


def _cumulative_length(curve: CurveSpec, grid: np.ndarray, rule: QuadratureRule):
    lo, hi = grid[:-1, None], grid[1:, None]
    pts = lo + 0.5 * (rule.points[None, :] + 1.0) * (hi - lo)
    sp = np.linalg.norm(curve.evaluate(pts)[1], axis=-1)
    seg = 0.5 * (hi[:, 0] - lo[:, 0]) * (sp @ rule.weights)
    return np.concatenate([[0.0], np.cumsum(seg)])


def arclength_partition(curve: CurveSpec, R: int, tol: float = 1e-10, cells: int = 2048) -> np.ndarray:
    """Breakpoints with equal arc length between consecutive entries.

    Arc length is tabulated with a 20-point Gauss rule on a fine grid that
    includes the curve's non-smooth points; each breakpoint is then located
    inside its grid cell with Brent's method.
    """
    if R < 1:
        raise MeshError("R must be >= 1")
    lo, hi = curve.domain
    grid = np.unique(np.concatenate([np.linspace(lo, hi, cells + 1), curve.breaks]))
    rule = gauss_legendre(20)
    cum = _cumulative_length(curve, grid, rule)
    total = cum[-1]
    out = np.empty(R + 1)
    out[0], out[-1] = lo, hi
    for i in range(1, R):
        target = total * i / R
        j = int(np.clip(np.searchsorted(cum, target) - 1, 0, len(grid) - 2))
        a, b = grid[j], grid[j + 1]

        def excess(t):
            return cum[j] + _cumulative_length(curve, np.array([a, t]), rule)[-1] - target

        fb = excess(b)
        out[i] = b if fb <= 0.0 else optimize.brentq(excess, a, b, xtol=tol, rtol=4 * np.finfo(float).eps)
    return out


def make_partition(curve: CurveSpec, R: int, strategy: str = "arclength") -> np.ndarray:
    if strategy == "uniform":
        return uniform_partition(curve, R)
    if strategy == "arclength":
        return arclength_partition(curve, R)
    raise MeshError(f"unknown partition strategy {strategy!r}")


__all__ = [
    "CurveError",
    "DofLayout",
    "LagrangeBasis",
    "MeshError",
    "ParametricMesh",
    "PhysicalMesh",
    "QuadratureRule",
    "arclength_partition",
    "default_quadrature_order",
    "gauss_legendre",
    "interpolate_meshes",
    "make_basis",
    "make_partition",
    "uniform_partition",
]
