import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pursuit_guard import force_field as ff
from pursuit_guard.errors import ConfigError, StateError
from pursuit_guard.geometry import Obstacle

PAR = ff.ForceParams(epsilon=0.5, dt=0.01, v_max=1.0)


# ---------------------------------------------------------------------------
# particles and forces
# ---------------------------------------------------------------------------

def test_sink_particles_quarters():
    s = ff.sink_particles((0, 0), (1, 0), 4)
    assert s.tolist() == [[0.25, 0.0], [0.5, 0.0], [0.75, 0.0]]


def test_sink_particles_needs_two_intervals():
    with pytest.raises(ConfigError):
        ff.sink_particles((0, 0), (1, 0), 1)


def test_disjoint_threshold():
    r = 0.1
    assert ff.obstacles_disjoint(2 * math.sqrt(3) * r, r)
    assert not ff.obstacles_disjoint(2 * math.sqrt(3) * r * (1 - 1e-9), r)


def test_single_point_repels_west():
    f = ff.repulsive_force((0, 0), [(2.0, 0.0)])
    assert f == pytest.approx([-0.25, 0.0])


def test_attraction_points_toward_sink():
    f = ff.attractive_force((0, 0), [(0.0, 0.5)], psi=2.0)
    assert f == pytest.approx([0.0, 8.0])


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(-math.pi, math.pi))
def test_inverse_square_scaling(d, ang):
    p = [(d * math.cos(ang), d * math.sin(ang))]
    p2 = [(2 * d * math.cos(ang), 2 * d * math.sin(ang))]
    f1 = ff.repulsive_force((0, 0), p)
    f2 = ff.repulsive_force((0, 0), p2)
    assert np.hypot(*f1) == pytest.approx(1 / d ** 2, rel=1e-12)
    assert np.hypot(*f2) * 4 == pytest.approx(np.hypot(*f1), rel=1e-12)


def test_coincident_point_saturates():
    f = ff.repulsive_force((0, 0), [(0.0, 0.0)], max_force=10.0)
    assert np.isfinite(f).all() and np.hypot(*f) == pytest.approx(10.0)


# ---------------------------------------------------------------------------
# gate
# ---------------------------------------------------------------------------

def test_gate_passes_small_step():
    f, g = ff.gate(np.array([0.1, 0.0]), 2.0, PAR)
    assert not g and f.tolist() == [0.1, 0.0]


def test_gate_scales_large_step():
    f, g = ff.gate(np.array([3.0, 4.0]), 2.0, PAR)
    # limit is nearest/2 - eps = 0.5
    assert g and np.hypot(*f) == pytest.approx(0.5)
    assert f == pytest.approx([0.3, 0.4])


def test_gate_stops_when_too_close():
    f, g = ff.gate(np.array([1.0, 0.0]), 0.8, PAR)
    assert g and f.tolist() == [0.0, 0.0]


# ---------------------------------------------------------------------------
# visibility, sinks, merging
# ---------------------------------------------------------------------------

def test_visible_points_face_the_robot():
    p = ff.visible_points((0, 0), Obstacle.disk((3, 0), 1.0), 10.0)
    assert len(p) > 0 and np.all(p[:, 0] < 3.0)
    assert len(ff.visible_points((0, 0), Obstacle.disk((30, 0), 1.0), 10.0)) == 0


def test_sinks_fill_open_gap_only():
    par = ff.ForceParams(epsilon=0.5, n_sink=4, robot_radius=0.1)
    a, b = Obstacle.disk((3, 1.5), 1.0), Obstacle.disk((3, -1.5), 1.0)
    views = [(j, ff.visible_points((0, 0), o, 5.0)) for j, o in enumerate([a, b])]
    sinks = ff.field_sinks((0, 0), views, par)
    assert len(sinks) == 3
    # all sinks lie between the two disks
    assert np.all(np.abs(sinks[:, 1]) < 1.0)
    m = ff.MergeTracker()
    m.merged.add((0, 1))
    assert len(ff.field_sinks((0, 0), views, par, m)) == 0


def test_merge_is_sticky():
    par = ff.ForceParams(epsilon=0.5, robot_radius=0.1)
    m = ff.MergeTracker()
    m.update([Obstacle.disk((0, 0), 1.0), Obstacle.disk((2.1, 0), 1.0)], par)
    assert m.fused(1, 0)
    m.update([Obstacle.disk((0, 0), 1.0), Obstacle.disk((9, 0), 1.0)], par)
    assert m.fused(0, 1)


def test_pair_gap_polygon_disk():
    sq = Obstacle.polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert ff.pair_gap(sq, Obstacle.disk((3, 0.5), 1.0)) == pytest.approx(1.0)
    sq2 = Obstacle.polygon([(2, 0), (3, 0), (3, 1), (2, 1)])
    assert ff.pair_gap(sq, sq2) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# total force and stepping
# ---------------------------------------------------------------------------

def test_force_capped_by_reach():
    s = ff.total_force((0, 0), [Obstacle.disk((3, 0), 1.0)], PAR)
    assert s.magnitude <= PAR.v_max * PAR.dt + 1e-15
    assert s.force[0] < 0


def test_symmetric_scene_gives_axial_force():
    obs = [Obstacle.disk((3, 2), 1.0), Obstacle.disk((3, -2), 1.0)]
    s = ff.total_force((0, 0), obs, PAR)
    assert abs(s.force[1]) < 1e-9


def mirror(o):
    c = (o.center[0], -o.center[1])
    v = (o.velocity[0], -o.velocity[1])
    if o.is_disk:
        return Obstacle.disk(c, o.radius, velocity=v)
    return Obstacle.polygon(o.vertices()[::-1] * [1, -1], velocity=v)


def test_mirrored_world_mirrors_path():
    obs = [Obstacle.disk((2.5, 1.0), 0.6, velocity=(-0.5, 0.1)),
           Obstacle.polygon([(2, -2), (3, -2.2), (3.2, -1.2), (2.2, -1.0)], velocity=(-0.3, 0.2))]
    w1 = ff.FieldWorld((0.0, 0.2), obs, PAR)
    w2 = ff.FieldWorld((0.0, -0.2), [mirror(o) for o in obs], PAR)
    p1 = w1.run(150)["path"]
    p2 = w2.run(150)["path"]
    assert p2 == pytest.approx(p1 * [1, -1], abs=1e-9)


def test_world_rejects_fast_obstacle():
    with pytest.raises(ConfigError):
        ff.FieldWorld((0, 0), [Obstacle.disk((3, 0), 1.0, velocity=(2.0, 0.0))], PAR)


def test_world_run_is_deterministic():
    a = ff.reference_layout_world(seed=4).run(100)
    b = ff.reference_layout_world(seed=4).run(100)
    assert np.array_equal(a["clearance"], b["clearance"])
    assert np.array_equal(a["path"], b["path"])


def test_safety_check():
    assert ff.safety_check([0.7, 0.6, 0.9], 0.5) == (True, 0.6, None)
    assert ff.safety_check([0.7, 0.4, 0.3], 0.5) == (False, 0.3, 1)
    with pytest.raises(StateError):
        ff.safety_check([], 0.5)


def test_sojourn_diagnostic():
    assert ff.sojourn_diagnostic(1.0, 2.0, 1.0) == pytest.approx(4 + math.pi)
    assert ff.sojourn_diagnostic(1.0, 2.0, 0.0) == math.inf
