import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hocurve import geometry as g
from hocurve import mesh as m
from hocurve import optimizer as o
from hocurve import parallel as par


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 60), st.integers(1, 16))
def test_blocks_partition_tasks(n, w):
    plan = par.WorkPlan("by_element", tuple(range(n)), w)
    blocks = plan.blocks()
    flat = [t for b in blocks for t in b]
    assert flat == list(range(n))  # every task exactly once, in order
    assert plan.effective_workers == max(1, min(w, n))
    if n:
        assert len(blocks) == plan.effective_workers
        sizes = [len(b) for b in blocks]
        assert max(sizes) - min(sizes) <= 1 and min(sizes) >= 1


def test_plan_validation():
    with pytest.raises(ValueError):
        par.WorkPlan("by_row", (0,), 1)
    with pytest.raises(ValueError):
        par.WorkPlan("by_curve", (0,), 0)


def test_mesh_params_default_q():
    assert par.MeshParams(p=3).q_eff == 5
    assert par.MeshParams(p=3, q=4).q_eff == 4


def meshes(curve, R=6, p=2, q=3):
    return m.interpolate_meshes(curve, R, p, q, m.arclength_partition(curve, R))


@pytest.mark.parametrize("curve", [g.circle(), g.naca4("2412"), g.sphere_arc()], ids=lambda c: c.name)
def test_by_elements_bitwise_for_any_worker_count(curve):
    x, s = meshes(curve)
    xr, sr, _ = o.optimize_constrained_per_element(curve, x, s)
    for w in (1, 2, 4, 9):
        rep = par.run_by_elements(curve, x, s, workers=w)
        assert rep.effective_workers == min(w, 6)
        assert np.array_equal(rep.x.nodes, xr.nodes)
        assert np.array_equal(rep.s.nodes, sr.nodes)
        assert not rep.failures
        assert len(rep.task_reports) == 6
        assert sum(rep.histogram) == sum(r.iterations for r in rep.task_reports)
        assert len(rep.histogram) == rep.effective_workers


def test_by_elements_more_workers_than_elements():
    c = g.semicircle()
    x, s = meshes(c, R=2)
    rep = par.run_by_elements(c, x, s, workers=8)
    assert rep.effective_workers == 2 and len(rep.histogram) == 2


def test_serial_baseline_and_speedup():
    c = g.circle()
    x, s = meshes(c, R=4)
    rep = par.run_by_elements(c, x, s, workers=2, serial_baseline=True)
    assert rep.serial_time > 0 and rep.speedup > 0
    d = rep.to_dict()
    assert d["speedup"] == rep.speedup and len(d["task_iterations"]) == 4


def test_identical_curves_identical_results():
    curves = [g.circle() for _ in range(8)]
    rep = par.run_by_curves(curves, par.MeshParams(p=2, R=4), workers=3)
    ref = rep.results[0]
    for r in rep.results[1:]:
        assert np.array_equal(r.x.nodes, ref.x.nodes) and np.array_equal(r.s.nodes, ref.s.nodes)
        assert r.report.iterations == ref.report.iterations
        assert r.report.E_final == ref.report.E_final
    assert rep.worker_iterations == [3 * ref.report.iterations, 3 * ref.report.iterations, 2 * ref.report.iterations]


def test_by_curves_matches_serial():
    curves = [g.circle(), g.spiral(), g.naca4("0012"), g.sphere_arc(), g.semicircle()]
    params = par.MeshParams(p=2, R=8)
    one = par.run_by_curves(curves, params, workers=1)
    many = par.run_by_curves(curves, params, workers=4)
    assert [r.name for r in one.results] == [c.name for c in curves]
    for a, b in zip(one.results, many.results):
        assert a.name == b.name
        assert np.array_equal(a.x.nodes, b.x.nodes) and np.array_equal(a.s.nodes, b.s.nodes)
        assert a.report.iterations == b.report.iterations


def test_straight_lines_excluded():
    curves = [g.circle(), g.line([0, 0], [1, 1], name="diag"), g.semicircle()]
    rep = par.run_by_curves(curves, par.MeshParams(p=2, R=3))
    assert rep.excluded == ["diag"]
    assert [r.name for r in rep.results] == ["circle", "semicircle"]


def test_failure_is_isolated():
    curves = [g.circle(), g.semicircle(), g.spiral()]
    params = [par.MeshParams(R=4), par.MeshParams(R=4, layout="loose"), par.MeshParams(R=8)]
    rep = par.run_by_curves(curves, params, workers=2)
    assert [f[0] for f in rep.failures] == ["semicircle"]
    assert "MeshError" in rep.failures[0][1]
    ok = [r for r in rep.results if not r.error]
    assert [r.name for r in ok] == ["circle", "spiral"]
    assert all(r.report.E_final < r.report.E_initial for r in ok)


def test_mesh_params_count_checked():
    with pytest.raises(ValueError):
        par.run_by_curves([g.circle()], [par.MeshParams(), par.MeshParams()])
