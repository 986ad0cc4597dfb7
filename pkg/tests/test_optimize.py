import numpy as np
import pytest

from conftest import lug_loads, plate_loads
from tracshape.errors import TracshapeError
from tracshape.fem import solve_static, evaluate
from tracshape.fixtures import make_fixture
from tracshape.mesh import measure, signed_element_measures, validate
from tracshape.optimize import (
    MODE_COMPLIANCE,
    MODE_VOLUME,
    HistoryRecord,
    OptimizationProblem,
    StepControl,
    optimize,
    stalled,
    step,
)


def _record(i, accepted):
    return HistoryRecord(i, 1.0, 1.0, 1.0, 1.0, 0.1, 0.0, 0.5, accepted)


def test_step_zero_velocity_is_identity():
    m = make_fixture("bar3d", {"n": 2})
    out, accepted, t = step(m, np.zeros((m.node_count, 3)))
    assert out is m
    assert accepted
    assert t == 0.0


def test_step_keeps_geometry_valid():
    m = make_fixture("bar3d", {"n": 2})
    rng = np.random.default_rng(0)
    v = rng.standard_normal((m.node_count, 3))
    out, accepted, t = step(m, v)
    assert accepted
    assert t > 0.0
    assert (signed_element_measures(out) > 0).all()
    assert validate(out).is_valid


def test_step_rejects_rather_than_invert():
    m = make_fixture("bar3d", {"n": 2})
    v = np.zeros((m.node_count, 3))
    v[0] = [1.0, 1.0, 1.0]  # crush one corner node into the mesh
    # a merit that always worsens forces every halving to fail
    out, accepted, t = step(m, v, StepControl(max_halvings=3),
                            merit=lambda mm: -measure(mm).volume)
    assert not accepted
    assert t == 0.0
    assert out is m


def test_optimize_zero_steps_is_identity(steel):
    m = make_fixture("lug3d", {"n": 6})
    problem = OptimizationProblem(mode=MODE_VOLUME)
    final, history = optimize(m, steel, lug_loads(), problem, max_steps=0)
    assert history == []
    assert np.array_equal(final.nodes, m.nodes)
    assert np.array_equal(final.elements, m.elements)


def test_optimize_volume_mode_smoke(steel):
    m = make_fixture("lug3d", {"n": 6})
    problem = OptimizationProblem(mode=MODE_VOLUME)
    final, history = optimize(m, steel, lug_loads(), problem, max_steps=5)
    assert 1 <= len(history) <= 5
    assert [r.iteration for r in history] == list(range(1, len(history) + 1))
    v0 = measure(m).volume
    assert history[-1].volume < v0
    # every intermediate mesh stayed valid
    assert all(r.min_quality > 0 for r in history)
    # the recorded final volume is the measured final volume
    assert history[-1].volume == pytest.approx(measure(final).volume, rel=1e-12)


def test_optimize_frozen_nodes_bitwise_unmoved(steel):
    m = make_fixture("lug3d", {"n": 6})
    problem = OptimizationProblem(mode=MODE_VOLUME)
    final, history = optimize(m, steel, lug_loads(), problem, max_steps=4)
    frozen = m.region_nodes("frozen")
    assert np.array_equal(final.nodes[frozen], m.nodes[frozen])


def test_optimize_respects_stress_limit_band(steel):
    m = make_fixture("lug3d", {"n": 6})
    problem = OptimizationProblem(mode=MODE_VOLUME)
    sol = solve_static(m, steel, lug_loads())
    theta0 = evaluate(m, sol, p=problem.p, material=steel).aggregate
    final, history = optimize(m, steel, lug_loads(), problem, max_steps=6)
    fsol = solve_static(final, steel, lug_loads())
    theta = evaluate(final, fsol, p=problem.p, material=steel).aggregate
    assert theta <= theta0 * (1.0 + problem.constraint_band) * (1 + 1e-9)


def test_optimize_compliance_mode_reduces_compliance(steel):
    m = make_fixture("plate_with_hole2d", {"n": 8})
    problem = OptimizationProblem(mode=MODE_COMPLIANCE)
    sol0 = solve_static(m, steel, plate_loads())
    final, history = optimize(m, steel, plate_loads(), problem, max_steps=6)
    accepted = [r for r in history if r.accepted]
    assert accepted, "no step was accepted"
    assert history[-1].compliance < sol0.compliance
    # volume stays within the constraint band of the initial volume
    v0 = measure(m).volume
    assert history[-1].volume <= v0 * (1.0 + problem.constraint_band) * (1 + 1e-9)


def test_optimize_stops_at_volume_cap(steel):
    m = make_fixture("lug3d", {"n": 6})
    problem = OptimizationProblem(mode=MODE_VOLUME, volume_reduction_cap=0.02)
    final, history = optimize(m, steel, lug_loads(), problem, max_steps=30)
    v0 = measure(m).volume
    assert history[-1].volume <= 0.98 * v0
    assert len(history) < 30


def test_optimize_design_frozen_overlap_rejected(steel):
    m = make_fixture("lug3d", {"n": 4})
    problem = OptimizationProblem(design_region="frozen")
    with pytest.raises(TracshapeError, match="overlap"):
        optimize(m, steel, lug_loads(), problem, max_steps=1)


def test_unknown_mode_rejected():
    with pytest.raises(TracshapeError, match="unknown optimization mode"):
        OptimizationProblem(mode="make-it-pretty")


def test_problem_parameter_validation():
    with pytest.raises(TracshapeError):
        OptimizationProblem(lagrange=-1.0)
    with pytest.raises(TracshapeError):
        OptimizationProblem(penalty=0.0)
    with pytest.raises(TracshapeError):
        OptimizationProblem(volume_reduction_cap=1.0)
    with pytest.raises(TracshapeError):
        OptimizationProblem(constraint_band=-0.1)


def test_missing_frozen_region_rejected(steel, reference_tet):
    m = reference_tet
    problem = OptimizationProblem()
    with pytest.raises(TracshapeError, match="frozen"):
        optimize(m, steel, lug_loads(), problem, max_steps=1)


def test_stalled_predicate():
    assert not stalled([])
    assert not stalled([_record(1, False), _record(2, False)])
    assert stalled([_record(i, False) for i in (1, 2, 3)])
    assert not stalled([_record(1, False), _record(2, True), _record(3, False)])
    assert stalled([_record(1, True)] + [_record(i, False) for i in (2, 3, 4)])


def test_optimize_load_scaling_homogeneity(steel):
    # doubling the load scales compliance by 4 and leaves the mode-2
    # accept/reject sequence (and geometry trajectory) unchanged
    m = make_fixture("plate_with_hole2d", {"n": 8})
    problem = OptimizationProblem(mode=MODE_COMPLIANCE)
    mesh1, hist1 = optimize(m, steel, plate_loads(50e3), problem, max_steps=4)
    mesh2, hist2 = optimize(m, steel, plate_loads(100e3), problem, max_steps=4)
    assert [r.accepted for r in hist1] == [r.accepted for r in hist2]
    for r1, r2 in zip(hist1, hist2):
        assert r2.compliance == pytest.approx(4.0 * r1.compliance, rel=1e-6)
        assert r2.volume == pytest.approx(r1.volume, rel=1e-9)


def test_optimize_determinism(steel):
    m = make_fixture("lug3d", {"n": 6})
    problem = OptimizationProblem(mode=MODE_VOLUME)
    a_mesh, a_hist = optimize(m, steel, lug_loads(), problem, max_steps=3)
    b_mesh, b_hist = optimize(m, steel, lug_loads(), problem, max_steps=3)
    assert np.array_equal(a_mesh.nodes, b_mesh.nodes)
    assert a_hist == b_hist
