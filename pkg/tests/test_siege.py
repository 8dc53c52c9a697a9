import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pursuit_guard import siege as sg
from pursuit_guard.errors import ConfigError, StateError

RING = sg.SiegeRing.circle((0, 0), 15.0, -math.pi / 2, math.pi / 2)
HALF = 15.0 * math.pi


def test_ring_arcs_split_the_circle():
    assert RING.arcs[0].length == pytest.approx(HALF, rel=1e-9)
    assert RING.arcs[1].length == pytest.approx(HALF, rel=1e-9)
    assert RING.diameter == pytest.approx(30.0, rel=1e-6)
    assert tuple(RING.P1) == pytest.approx((0.0, -15.0), abs=1e-9)


def test_ring_rejects_bad_split():
    with pytest.raises(ConfigError):
        sg.SiegeRing.circle((0, 0), 1.0, 1.0, 0.5)


def test_weights_fall_off_linearly():
    w = sg.intruder_weights([0.0, 15.0, 30.0, 60.0], 30.0)
    assert list(w) == [1.0, 0.5, 0.0, 0.0]


def test_projection_east_point():
    rp = sg.ring_projection(RING, (5.0, 0.0))
    assert rp.arc == 0
    assert rp.s == pytest.approx(HALF / 2, rel=1e-6)
    assert tuple(rp.point) == pytest.approx((15.0, 0.0), abs=1e-6)


def test_projection_west_point_on_second_arc():
    rp = sg.ring_projection(RING, (-4.0, 0.0))
    assert rp.arc == 1
    assert rp.s == pytest.approx(HALF / 2, rel=1e-6)


def test_projection_outside_raises():
    with pytest.raises(StateError):
        sg.ring_projection(RING, (20.0, 0.0))


def test_eta_modes_single_intruder():
    pts = np.array([[15.0, 0.0], [0.0, 15.0]])
    one = sg.IntruderSet([[3.0, 4.0]], 4.2, "normalized")
    alpha = np.hypot(*(pts - [3.0, 4.0]).T)
    assert sg.eta_values(RING, one, pts) == pytest.approx(alpha, rel=1e-14)
    printed = sg.IntruderSet([[3.0, 4.0]], 4.2, "printed")
    psi = 1 - alpha / RING.diameter
    assert sg.eta_values(RING, printed, pts) == pytest.approx(psi * alpha, rel=1e-12)


def test_eta_normalized_two_intruders_hand_value():
    # point (15, 0); intruders at distances 6 and 12
    ints = sg.IntruderSet([[9.0, 0.0], [3.0, 0.0]], 4.2, "normalized")
    D = RING.diameter
    w1, w2 = 1 - 6 / D, 1 - 12 / D
    want = (w1 * 6 + w2 * 12) / (w1 + w2)
    assert sg.eta_values(RING, ints, [[15.0, 0.0]])[0] == pytest.approx(want, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.9), st.floats(0, 2 * math.pi), st.integers(0, 10_000))
def test_normalized_single_intruder_matches_nearest_law(r, th, seed):
    rng = np.random.default_rng(seed)
    c1 = np.sort(rng.uniform(0, HALF, 5))
    c2 = np.sort(rng.uniform(0, HALF, 5))
    team = sg.SiegeTeam(c1, c2, 3.0, 1.0)
    p = [[15 * r * math.cos(th), 15 * r * math.sin(th)]]
    a = sg.ring_control_law(RING, team, sg.IntruderSet(p, 4.2, "normalized"))
    b = sg.ring_control_law(RING, team, sg.IntruderSet(p, 4.2, "nearest"))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_weights_bounded(seed, m):
    rng = np.random.default_rng(seed)
    P = rng.uniform(-10, 10, (m, 2))
    s = rng.uniform(0, HALF, 50)
    pts = RING.arcs[0].points_at(s)
    alpha = np.hypot(*(pts[:, None, :] - P[None]).transpose(2, 0, 1))
    w = sg.intruder_weights(alpha, RING.diameter)
    assert np.all((w >= 0) & (w <= 1))


def test_second_arc_velocity_sign_flip():
    team = sg.SiegeTeam([10.0, 30.0], [10.0, 30.0], 3.0, 1.0)
    ints = sg.IntruderSet([[-5.0, 5.0]], 4.2)
    u1, u2 = sg.ring_control_law(RING, team, ints)
    v1, v2 = sg.ring_velocities(RING, team, ints)
    assert np.array_equal(v1, u1) and np.array_equal(v2, -u2)


def test_feasibility_well_spread_team():
    g = HALF / 5
    c = g * (np.arange(5) + 0.5)
    team = sg.SiegeTeam(c, c, 3.0, 1.0)
    ok, margin = sg.ring_feasibility(RING, team, sg.IntruderSet([[0.0, 0.0]], 4.2))
    assert ok and margin < 0


def test_feasibility_bunched_team_fails():
    team = sg.SiegeTeam([1.0, 2.0], [1.0, 2.0], 3.0, 1.0)
    ok, margin = sg.ring_feasibility(RING, team, sg.IntruderSet([[10.0, 0.0]], 4.2))
    assert not ok and margin > 1.0


def test_escape_check_by_coordinate():
    team = sg.SiegeTeam([5.0], [20.0], 3.0, 1.0)
    assert sg.escape_check(RING, team, arc=1, s=20.5) == (True, [(1, 0)])
    assert sg.escape_check(RING, team, arc=0, s=20.5) == (False, [])


def test_escape_check_by_point():
    team = sg.SiegeTeam([HALF / 2], [1.0], 3.0, 1.0)
    ok, wit = sg.escape_check(RING, team, crossing_point=(15.0, 0.0))
    assert ok and wit == [(0, 0)]
