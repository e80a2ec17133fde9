import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson
from scipy.interpolate import BarycentricInterpolator

from conftest import fd_gradient, fd_jacobian, perturbed_problem
from hocurve import disparity as d
from hocurve import geometry as g
from hocurve import mesh as m
from hocurve.optimizer import Config, optimize


def simpson_energy(curve, x, s, n=100_001):
    """E by composite Simpson with an independent Lagrange evaluation."""
    xi = np.linspace(-1, 1, n)
    total = 0.0
    bx, bs = x.basis.nodes, s.basis.nodes
    for X, S in zip(x.element_nodes(), s.element_nodes()):
        px = BarycentricInterpolator(bx, X)
        ps = BarycentricInterpolator(bs, S)
        r = px(xi) - curve.evaluate(ps(xi))[0]
        J = np.linalg.norm(px.derivative(xi), axis=1)
        total += simpson(np.sum(r * r, axis=1) * J, x=xi)
    return total


# --- energy ------------------------------------------------------------------


def test_semicircle_chord_closed_form():
    c = g.semicircle()
    x, s = m.interpolate_meshes(c, 1, 1, 1, c.domain)
    E = d.energy(d.Problem(c, x, s, m.DofLayout.constrained(1, 1, 1)))
    assert abs(E - (8 / 3 - 16 / np.pi**2)) < 1e-14
    assert abs(E - simpson_energy(c, x, s)) < 1e-9 * E


def test_straight_line_is_exact():
    c = g.line([0.0, 0.0], [3.0, 4.0])
    x, s = m.interpolate_meshes(c, 1, 1, 1, c.domain)
    pr = d.Problem(c, x, s, m.DofLayout.constrained(1, 1, 1))
    assert d.energy(pr) < 1e-24
    x, s = m.interpolate_meshes(c, 3, 2, 3, m.uniform_partition(c, 3))
    pr = d.Problem(c, x, s, m.DofLayout.unconstrained(3, 2, 3))
    assert d.energy(pr) < 1e-24
    assert np.max(np.abs(d.gradient(pr))) < 1e-12
    D = d.decompose_error(c, x, s, 50)
    assert np.max(np.abs(np.stack([D.abs_e, D.e_t, D.e_n]))) < 1e-12


@pytest.mark.parametrize(
    "curve,R,p,q", [(g.circle(), 2, 2, 3), (g.sphere_arc(), 3, 3, 5), (g.naca4("0012"), 4, 2, 3), (g.spiral(), 6, 4, 7)]
)
def test_energy_matches_simpson(curve, R, p, q):
    pr = perturbed_problem(curve, R, p, q, seed=3)
    fine = d.Problem(curve, pr.x, pr.s, pr.layout, quadrature=m.gauss_legendre(64))
    E = d.energy(fine)
    assert abs(E - simpson_energy(curve, pr.x, pr.s)) < 1e-9 * E
    # the default rule is already close on these resolved meshes
    assert abs(d.energy(pr) - E) < 1e-6 * E


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 10_000))
def test_energy_scales_cubically(c, seed):
    base = perturbed_problem(g.circle(), 2, 2, 3, seed=seed)
    big = g.circle(c)
    x = base.x.copy()
    x.nodes *= c
    E0 = d.energy(base)
    E1 = d.energy(d.Problem(big, x, base.s, base.layout))
    assert abs(E1 - c**3 * E0) < 1e-11 * c**3 * E0


def test_degenerate_element():
    c = g.circle()
    x, s = m.interpolate_meshes(c, 1, 2, 2, m.uniform_partition(c, 1))
    x.nodes[:] = x.nodes[0]
    with pytest.raises(d.DegenerateElementError):
        d.energy(d.Problem(c, x, s, m.DofLayout.constrained(1, 2, 2)))


# --- barrier -----------------------------------------------------------------


def test_barrier_affine_values():
    c = g.circle(domain=(0.0, 8.0))
    x, s = m.interpolate_meshes(c, 2, 2, 3, m.uniform_partition(c, 2))
    pr = d.Problem(c, x, s, m.DofLayout.constrained(2, 2, 3))
    # s' = 2 on both elements, reference length 2 each
    assert abs(d.barrier_value(pr) - 2 * 2 * np.log(2.0)) < 1e-14
    c1 = g.circle(domain=(0.0, 2.0))
    x, s = m.interpolate_meshes(c1, 1, 2, 3, c1.domain)
    assert abs(d.barrier_value(d.Problem(c1, x, s, m.DofLayout.constrained(1, 2, 3)))) < 1e-15


def test_barrier_reversed_direction():
    c = g.circle(domain=(0.0, 8.0))
    x, s = m.interpolate_meshes(c, 2, 2, 3, [8.0, 4.0, 0.0])
    pr = d.Problem(c, x, s, m.DofLayout.constrained(2, 2, 3))
    assert abs(d.barrier_value(pr) - 4 * np.log(2.0)) < 1e-14


def test_barrier_matches_simpson():
    pr = perturbed_problem(g.circle(), 1, 2, 3, seed=11, amp=0.2)
    xi = np.linspace(-1, 1, 100_001)
    ps = BarycentricInterpolator(pr.s.basis.nodes, pr.s.nodes)
    ref = simpson(np.log(ps.derivative(xi)), x=xi)
    assert abs(d.barrier_value(pr) - ref) < 1e-8


def test_barrier_on_tangled_s():
    c = g.circle()
    x, s = m.interpolate_meshes(c, 1, 2, 2, m.uniform_partition(c, 1))
    s.nodes[1] = 7.0  # past the right end
    pr = d.Problem(c, x, s, m.DofLayout.constrained(1, 2, 2))
    with pytest.raises(d.InvalidParametrizationError):
        d.barrier_value(pr)
    assert pr.operator.objective(pr.z_full(), 1e-3) == np.inf


@pytest.mark.parametrize("mu", [1e-2, 1e-4, 1e-6])
def test_penalized_linear_in_mu(mu):
    pr = perturbed_problem(g.sphere_arc(), 2, 2, 3, seed=5, mu=mu)
    P, E, B = d.penalized(pr), d.energy(pr), d.barrier_value(pr)
    assert abs((P - E) - (-mu * B)) <= 4 * np.finfo(float).eps * max(abs(E), 1.0)


# --- validity ----------------------------------------------------------------


def test_validity_examples():
    c = g.circle()
    _, s = m.interpolate_meshes(c, 3, 2, 2, m.uniform_partition(c, 3))
    assert d.check_validity(s)
    s.nodes[1] = s.nodes[2] + 0.3  # middle node beyond the element end
    assert not d.check_validity(s)
    with pytest.raises(ValueError):
        d.check_validity(s, oversample=1)


def test_validity_reversed():
    c = g.circle()
    _, s = m.interpolate_meshes(c, 2, 2, 3, [2 * np.pi, np.pi, 0.0])
    assert s.sigma_dir == -1 and d.check_validity(s)


def test_naca_tangled_iterate_is_invalid():
    c = g.builtin("naca0012_warped")
    x, s = m.interpolate_meshes(c, 4, 2, 3, m.uniform_partition(c, 4))
    L = m.DofLayout.constrained(4, 2, 3)
    seen = []
    for k in range(1, 12):
        _, so, rep = optimize(c, x, s, L, Config(barrier=False, max_iter=k, outer_passes=1))
        seen.append(d.check_validity(so, 40))
    assert not all(seen)


# --- derivatives -------------------------------------------------------------


CONFIGS = [
    (g.circle(), 2, 2, 3),
    (g.circle(), 1, 2, 3),
    (g.sphere_arc(), 2, 3, 5),
    (g.naca4("0012"), 3, 2, 3),
    (g.spiral(), 2, 3, 4),
]


@pytest.mark.parametrize("layout", ["constrained", "unconstrained"])
@pytest.mark.parametrize("mu", [0.0, 1e-3])
@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: f"{c[0].name}-R{c[1]}" if hasattr(c, "__len__") else None)
def test_gradient_and_hessian_fd(cfg, layout, mu):
    curve, R, p, q = cfg
    pr = perturbed_problem(curve, R, p, q, layout, seed=R + p, mu=mu)
    op = pr.operator
    z0 = pr.z_full()
    free = op.free_index

    def f(v):
        z = z0.copy()
        z[free] = v
        return op.assemble(z, mu, 0)[0]

    def grad(v):
        z = z0.copy()
        z[free] = v
        return op.assemble(z, mu, 1)[3]

    v0 = z0[free]
    ev = d.evaluate(pr)
    assert ev.grad.shape == (op.n_free,)
    gfd = fd_gradient(f, v0, 1e-6)
    scale = np.max(np.abs(ev.grad))
    assert np.all(np.abs(ev.grad - gfd) <= 1e-6 * np.maximum(np.abs(gfd), 1e-3 * scale))
    Hfd = fd_jacobian(grad, v0, 1e-5)
    hs = np.max(np.abs(ev.hess))
    assert np.all(np.abs(ev.hess - Hfd) <= 1e-4 * np.maximum(np.abs(Hfd), 1e-3 * hs))
    assert np.max(np.abs(ev.hess - ev.hess.T)) <= 1e-10 * hs


def element_of_free(op):
    """Owning element of every free DOF."""
    owner = np.full(op.n_full, -1)
    for e in range(op.R - 1, -1, -1):
        owner[op.loc[e]] = e
    return owner[op.free_index]


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(1, 5), st.integers(0, 1000))
def test_constrained_hessian_block_diagonal(R, p, q, seed):
    pr = perturbed_problem(g.sphere_arc(), R, p, q, seed=seed, amp=0.01)
    H = d.hessian(pr)
    own = element_of_free(pr.operator)
    off = own[:, None] != own[None, :]
    assert np.all(H[off] == 0.0)


def test_free_dof_ordering():
    c = g.circle()
    x, s = m.interpolate_meshes(c, 2, 2, 3, m.uniform_partition(c, 2))
    op = d.Problem(c, x, s, m.DofLayout.constrained(2, 2, 3)).operator
    nx = 5 * 2
    # element 0: x node 1 (x, y), s nodes 1, 2; element 1: x node 3, s nodes 4, 5
    assert op.free_index.tolist() == [2, 3, nx + 1, nx + 2, 6, 7, nx + 4, nx + 5]
    op = d.Problem(c, x, s, m.DofLayout.unconstrained(2, 2, 3)).operator
    assert op.free_index.tolist() == [2, 3, 4, 5, nx + 1, nx + 2, nx + 3, 6, 7, nx + 4, nx + 5]


# --- decomposition and roots ------------------------------------------------


def test_decomposition_chord_closed_form():
    c = g.semicircle()
    x, s = m.interpolate_meshes(c, 1, 1, 1, c.domain)
    D = d.decompose_error(c, x, s, 101)
    xi = np.linspace(-1, 1, 101)
    t = np.pi * (xi + 1) / 2
    np.testing.assert_allclose(D.e_t, xi * np.sin(t), atol=1e-15)
    np.testing.assert_allclose(D.e_n, 1 + xi * np.cos(t), atol=1e-15)
    np.testing.assert_allclose(D.xi_global, (xi + 1) / 2, atol=1e-16)


@pytest.mark.parametrize("curve", [g.circle(), g.sphere_arc(), g.spiral()], ids=lambda c: c.name)
def test_decomposition_pythagoras(curve):
    pr = perturbed_problem(curve, 3, 2, 3, seed=2)
    D = d.decompose_error(curve, pr.x, pr.s, 300)
    parts = D.e_t**2 + D.e_n**2 + (D.e_b**2 if D.e_b is not None else 0)
    assert np.max(np.abs(D.abs_e**2 - parts)) < 1e-10
    assert (D.e_b is not None) == (curve.dim == 3)


def test_initial_interpolation_zeros():
    c = g.semicircle()
    for p in (2, 3, 4):
        x, s = m.interpolate_meshes(c, 1, p, 2 * p - 1, c.domain)
        D = d.decompose_error(c, x, s, 2000)
        assert d.count_zero_runs(D.abs_e) == p + 1


def test_count_roots_examples():
    v = np.sin(np.linspace(0, 2 * np.pi, 1000))
    assert d.count_roots(v, 1e-9) == 3
    assert d.count_roots(np.full(10, 2.0)) == 0
    assert d.count_roots([1.0, -1.0]) == 1
    assert d.count_zero_runs([0.0, 1.0, 0.0, 0.0, 2.0, 0.0]) == 3
    with pytest.raises(ValueError):
        d.count_roots([1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=6, unique=True))
def test_count_roots_of_polynomial(roots):
    roots = np.array(roots)
    if len(roots) > 1 and np.min(np.diff(np.sort(roots))) < 0.05:
        return
    xi = np.linspace(-1, 1, 4001)
    v = np.prod(xi[:, None] - roots[None, :], axis=1)
    assert d.count_roots(v, 0.0) == len(roots)
