import numpy as np
import pytest

from hocurve import geometry as g
from hocurve.disparity import Problem
from hocurve.mesh import DofLayout, interpolate_meshes, make_partition

# filled by test_acceptance, printed at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


def fd_gradient(f, z, h=1e-6):
    out = np.empty_like(z)
    for i in range(len(z)):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        out[i] = (f(zp) - f(zm)) / (2 * h)
    return out


def fd_jacobian(grad, z, h=1e-6):
    cols = []
    for i in range(len(z)):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        cols.append((grad(zp) - grad(zm)) / (2 * h))
    return np.array(cols).T


def perturbed_problem(curve, R, p, q, layout="constrained", seed=0, amp=0.02, mu=0.0):
    """Interpolatory meshes with small random moves of the free nodes."""
    rng = np.random.default_rng(seed)
    x, s = interpolate_meshes(curve, R, p, q, make_partition(curve, R, "uniform"))
    L = DofLayout(layout, R, p, q)
    h = (curve.domain[1] - curve.domain[0]) / R
    x.nodes[L.physical_free] += amp * rng.standard_normal(x.nodes[L.physical_free].shape)
    s.nodes[L.parametric_free] += amp * h / q * rng.uniform(-1, 1, L.parametric_free.sum())
    return Problem(curve, x, s, L, mu=mu)


@pytest.fixture
def circle():
    return g.circle()


@pytest.fixture
def semicircle():
    return g.semicircle()


@pytest.fixture
def sphere():
    return g.sphere_arc()
