import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pursuit_guard import intercept_boundary as ib
from pursuit_guard.errors import ConfigError
from pursuit_guard.geometry import ParamCurve

LINE = ParamCurve.segment((0, 0), (10, 0))


def team(coords, v=1.0, k=1, eps=1.0, curve=LINE):
    return ib.BoundaryTeam(curve, np.asarray(coords, float), v, k, eps)


# ---------------------------------------------------------------------------
# distances and segments
# ---------------------------------------------------------------------------

def test_kth_distances_small_example():
    c = [0.0, 2.0, 5.0]
    assert ib.kth_distances(c, 1.0, 1) == 1.0
    assert ib.kth_distances(c, 1.0, 2) == 1.0
    assert ib.kth_distances(c, 1.0, 3) == 4.0


def test_kth_distances_k_too_large():
    with pytest.raises(ConfigError):
        ib.kth_distances([0.0, 1.0], 0.5, 3)


def test_team_rejects_bad_k():
    with pytest.raises(ConfigError):
        team([1, 2, 3], k=2)


def test_segments_single_interceptor():
    t = team([2.0, 6.0])
    s0, s1 = ib.responsibility_segments(t, 0), ib.responsibility_segments(t, 1)
    assert s0.minus == (0.0, 2.0) and s0.plus == (2.0, 4.0)
    assert s1.minus == (4.0, 6.0) and s1.plus == (6.0, 10.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=4, max_size=7), st.integers(1, 2))
def test_segments_tile_the_boundary(raw, k):
    c = np.sort(np.asarray(raw))
    if 2 * k > len(c):
        return
    t = team(c, k=k)
    parts = []
    for i in range(t.n):
        seg = ib.responsibility_segments(t, i)
        parts += [p for p in (seg.minus, seg.plus) if p is not None and p[1] > p[0]]
    parts.sort()
    # every boundary point is covered and the pieces do not overlap
    assert parts[0][0] == 0.0 and parts[-1][1] == pytest.approx(10.0)
    for a, b in zip(parts, parts[1:]):
        assert b[0] == pytest.approx(a[1], abs=1e-12)


# ---------------------------------------------------------------------------
# danger values: hand-computed
# ---------------------------------------------------------------------------

def test_danger_symmetric_single_robot():
    t = team([5.0])
    it = ib.IntruderState((5.0, 2.0), 1.0)
    expected = 5.0 - math.sqrt(29.0)
    f = ib.feasibility(t, it)
    assert f.margin == pytest.approx(expected, abs=1e-12)
    assert f.feasible


def test_control_moves_toward_danger():
    t = team([5.0])
    it = ib.IntruderState((2.0, 2.0), 1.0)
    hm, hp = ib.danger_pair(t, it, 0)
    assert hm == pytest.approx(5.0 - math.sqrt(8.0))
    assert hp == pytest.approx(5.0 - math.sqrt(68.0))
    assert ib.control_law(t, it)[0] == -1.0


def test_tie_gives_zero_velocity():
    t = team([5.0])
    u, ties = ib.control_detail(t, ib.IntruderState((5.0, 3.0), 1.0))
    assert u[0] == 0.0 and ties[0]


def test_intercept_check_witnesses():
    t = team([1.0, 5.0])
    ok, wit = ib.intercept_check(t, s=1.5)
    assert ok and wit == [0]
    ok, wit = ib.intercept_check(t, s=3.0)
    assert not ok and wit == []


def test_k2_intercept_needs_two_witnesses():
    t = team([1.0, 1.5, 6.0, 9.0], k=2)
    assert ib.intercept_check(t, s=1.2)[0]
    assert not ib.intercept_check(t, s=6.2)[0]


# ---------------------------------------------------------------------------
# closed form against an independent brute-force supremum
# ---------------------------------------------------------------------------

def brute_margin(coords, k, curve, xi, v_r, v_i, n=20001):
    s = np.linspace(0.0, curve.length, n)
    pts = curve.points_at(s)
    d = np.sort(np.abs(s[:, None] - np.asarray(coords)[None]), axis=1)[:, k - 1]
    a = np.hypot(pts[:, 0] - xi[0], pts[:, 1] - xi[1])
    return float((d - a * v_r / v_i).max())


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=4, max_size=6), st.floats(0.5, 9.5),
       st.floats(0.2, 6.0), st.integers(1, 2))
def test_endpoint_matches_brute_force(raw, x, y, k):
    c = np.sort(np.asarray(raw))
    t = team(c, v=3.0, k=k)
    it = ib.IntruderState((x, y), 4.2)
    got = ib.feasibility(t, it, method="endpoint").margin
    ref = brute_margin(c, k, LINE, (x, y), 3.0, 4.2)
    assert got == pytest.approx(ref, abs=2e-3)


def test_sampled_and_endpoint_agree_on_arc():
    arc = ParamCurve.circle_arc((0, 0), 10.0, -2.5, -0.6)
    t = team([3.0, 9.0, 15.0], v=3.0, curve=arc)
    it = ib.IntruderState((1.0, -2.0), 4.2)
    a = ib.feasibility(t, it, method="endpoint").margin
    b = ib.sampled_margin(t, it)
    assert a == pytest.approx(b, abs=1e-6 * arc.length)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=3, max_size=6),
       st.lists(st.sampled_from([-1.0, 0.0, 1.0]), min_size=6, max_size=6),
       st.floats(0.01, 2.0))
def test_integration_preserves_order(raw, signs, dt):
    c = np.sort(np.asarray(raw))
    u = np.asarray(signs[:len(c)]) * 3.0
    new, _ = ib.integrate_coords(c, u, dt, 10.0)
    assert np.all(np.diff(new) >= 0)
    assert new.min() >= 0.0 and new.max() <= 10.0


def test_integration_clamps_crossing_pair_to_midpoint():
    new, ev = ib.integrate_coords([4.0, 5.0], [1.0, -1.0], 1.0, 10.0)
    assert list(new) == [4.5, 4.5]
    assert ev == [(0, 1, 4.5)]
