import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hocurve import geometry as g
from hocurve import mesh as m


def test_linear_basis_midpoint():
    for fam in m.NODE_FAMILIES:
        vals, ders = m.make_basis(1, fam)(0.0)
        np.testing.assert_allclose(vals[0], [0.5, 0.5], atol=1e-16)
        np.testing.assert_allclose(ders[0], [-0.5, 0.5], atol=1e-16)


def test_cardinal_at_nodes():
    b = m.make_basis(2, "equispaced")
    np.testing.assert_array_equal(b(-1.0)[0][0], [1.0, 0.0, 0.0])
    for p in range(1, 9):
        b = m.make_basis(p)
        np.testing.assert_allclose(b(b.nodes)[0], np.eye(p + 1), atol=1e-15)


def test_lobatto_degree4_nodes():
    x = m.make_basis(4).nodes
    r = np.sqrt(3.0 / 7.0)
    np.testing.assert_allclose(x, [-1, -r, 0, r, 1], atol=1e-15)
    np.testing.assert_array_equal(x, -x[::-1])


def test_basis_derivative_at_nodes_is_diff_matrix():
    b = m.make_basis(5)
    # derivative of the interpolant of xi^5 at the nodes
    D = b.diff_matrix()
    np.testing.assert_allclose(D @ b.nodes**5, 5 * b.nodes**4, atol=1e-12)
    _, ders = b(b.nodes)
    np.testing.assert_allclose(ders, D, atol=1e-13)


def test_degree_zero_rejected():
    with pytest.raises(m.MeshError):
        m.make_basis(0)
    with pytest.raises(m.MeshError):
        m.make_basis(2, "chebyshev")


@pytest.mark.parametrize("p", range(1, 11))
@pytest.mark.parametrize("fam", m.NODE_FAMILIES)
def test_partition_of_unity(p, fam):
    xi = np.linspace(-1, 1, 101)
    vals, ders = m.make_basis(p, fam)(xi)
    assert np.max(np.abs(vals.sum(axis=1) - 1.0)) < 1e-12
    assert np.max(np.abs(ders.sum(axis=1))) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.lists(st.floats(-3, 3), min_size=9, max_size=9), st.floats(-1, 1))
def test_basis_reproduces_polynomials(p, coef, xi):
    """Degree-p interpolation is exact for degree-p polynomials."""
    c = np.array(coef[: p + 1])
    poly = np.polynomial.Polynomial(c)
    b = m.make_basis(p)
    vals, ders = b(np.array([xi]))
    assert abs(vals[0] @ poly(b.nodes) - poly(xi)) < 1e-11 * (1 + np.abs(c).sum())
    assert abs(ders[0] @ poly(b.nodes) - poly.deriv()(xi)) < 1e-9 * (1 + np.abs(c).sum())


@pytest.mark.parametrize("n", [1, 2, 5, 20, 64, 128])
def test_gauss_legendre_exactness(n):
    q = m.gauss_legendre(n)
    assert abs(q.weights.sum() - 2.0) < 1e-13
    assert np.all(q.weights > 0)
    for k in range(2 * n):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(q.weights @ q.points**k - exact) < 1e-12


def test_gauss_legendre_range():
    for n in (0, 129):
        with pytest.raises(m.MeshError):
            m.gauss_legendre(n)
    # two-point rule, +-1/sqrt(3)
    np.testing.assert_allclose(m.gauss_legendre(2).points, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)


def test_interpolate_circle():
    c = g.circle()
    x, s = m.interpolate_meshes(c, 4, 3, 5, m.uniform_partition(c, 4))
    assert x.nodes.shape == (13, 2) and s.nodes.shape == (21,)
    np.testing.assert_array_equal(s.interfaces, m.uniform_partition(c, 4))
    # nodes lie on the curve and interfaces are shared
    np.testing.assert_allclose(np.linalg.norm(x.nodes, axis=1), 1.0, atol=1e-15)
    xe = x.element_nodes()
    np.testing.assert_array_equal(xe[:-1, -1], xe[1:, 0])
    # s is affine on each element
    xi = np.linspace(-1, 1, 7)
    sv, sd = s.evaluate(xi)
    np.testing.assert_allclose(sd, np.pi / 4, atol=1e-13)


def test_reversed_partition():
    c = g.semicircle()
    x, s = m.interpolate_meshes(c, 2, 2, 3, [np.pi, np.pi / 2, 0.0])
    assert s.sigma_dir == -1
    np.testing.assert_allclose(x.nodes[0], [-1, 0], atol=1e-15)


@pytest.mark.parametrize(
    "partition", [[0.0, 2.0, 1.0, np.pi], [0.0, 1.0, 3.0], [0.5, 1.0, np.pi]]
)
def test_bad_partitions(partition):
    with pytest.raises(m.MeshError):
        m.interpolate_meshes(g.semicircle(), len(partition) - 1, 2, 2, partition)


def test_arclength_partition_equal_lengths():
    for c in (g.spiral(), g.naca4("0012"), g.sphere_arc()):
        t = m.arclength_partition(c, 7)
        L = [g.arc_length(c, a, b) for a, b in zip(t[:-1], t[1:])]
        assert np.ptp(L) < 1e-8 * np.mean(L)
        assert t[0] == c.domain[0] and t[-1] == c.domain[1]


def test_uniform_partition_of_circle_is_arclength():
    c = g.circle()
    np.testing.assert_allclose(m.arclength_partition(c, 6), m.uniform_partition(c, 6), atol=1e-10)


def test_layout_masks():
    L = m.DofLayout.constrained(3, 2, 3)
    np.testing.assert_array_equal(L.physical_free, [0, 1, 0, 1, 0, 1, 0])
    np.testing.assert_array_equal(L.element_parametric_mask()[0], [0, 1, 1, 0])
    U = m.DofLayout.unconstrained(3, 2, 3)
    assert U.physical_free.sum() == 5 and U.parametric_free.sum() == 8
    with pytest.raises(m.MeshError):
        m.DofLayout("loose", 3, 2, 3)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 6), st.integers(1, 8), st.sampled_from(["constrained", "unconstrained"]))
def test_layout_counts(R, p, q, mode):
    L = m.DofLayout(mode, R, p, q)
    fixed_x = (~L.physical_free).sum()
    fixed_s = (~L.parametric_free).sum()
    if mode == "constrained":
        assert fixed_x == fixed_s == R + 1
    else:
        assert fixed_x == fixed_s == 2
