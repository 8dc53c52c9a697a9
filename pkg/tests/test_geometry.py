import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pursuit_guard.errors import DomainError, GeometryError
from pursuit_guard.geometry import (ConvexRegion, Obstacle, ParamCurve, arc_coord, arc_point,
                                    chord_length, obstacle_distances, obstacle_gap,
                                    polar_arc_length, visible_extremes)


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

def test_chord_length_345():
    assert chord_length((0, 0), (3, 4)) == 5.0


def test_segment_arc_point_and_coord():
    c = ParamCurve.segment((0, 0), (10, 0))
    assert c.length == pytest.approx(10.0)
    assert tuple(arc_point(c, 2.5)) == pytest.approx((2.5, 0.0))
    assert arc_coord(c, (7.0, 0.0)) == pytest.approx(7.0)


def test_arc_point_rejects_out_of_range():
    c = ParamCurve.segment((0, 0), (1, 0))
    with pytest.raises(DomainError):
        arc_point(c, 1.5)


def test_arc_coord_rejects_far_point():
    c = ParamCurve.segment((0, 0), (1, 0))
    with pytest.raises(GeometryError):
        arc_coord(c, (0.5, 0.3))


def test_quarter_circle_length_and_midpoint():
    c = ParamCurve.circle_arc((0, 0), 2.0, 0.0, math.pi / 2)
    assert c.length == pytest.approx(math.pi, rel=1e-9)
    mid = arc_point(c, c.length / 2)
    assert mid.x == pytest.approx(math.sqrt(2), abs=1e-9)
    assert mid.y == pytest.approx(math.sqrt(2), abs=1e-9)


def test_polar_arc_length_circle():
    # r = 3 over [0, pi]: half circumference
    assert polar_arc_length(lambda b: 3.0, 0.0, math.pi) == pytest.approx(3 * math.pi, rel=1e-12)


def test_polar_arc_length_spiral_against_closed_form():
    # r = b (Archimedean spiral), length on [0, 1]: (sqrt(2) + asinh(1)) / 2
    expected = 0.5 * (math.sqrt(2.0) + math.asinh(1.0))
    assert polar_arc_length(lambda b: b, 0.0, 1.0) == pytest.approx(expected, rel=1e-10)


def test_polar_arc_length_reversed_bounds():
    with pytest.raises(DomainError):
        polar_arc_length(lambda b: 1.0, 1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95))
def test_arc_roundtrip_on_circle(frac):
    c = ParamCurve.circle_arc((1, -2), 5.0, -math.pi / 3, math.pi)
    s = frac * c.length
    assert arc_coord(c, arc_point(c, s)) == pytest.approx(s, abs=1e-6 * c.length)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_arc_distance_bounds_chord(a, b):
    # along-curve distance is never shorter than the straight chord
    c = ParamCurve.polyline([(0, 0), (4, 0), (6, 3), (6, 8)])
    sa, sb = a * c.length, b * c.length
    assert abs(sa - sb) >= chord_length(arc_point(c, sa), arc_point(c, sb)) - 1e-9


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

def test_region_contains_and_signed_distance():
    sq = ConvexRegion.polygon([(0, 0), (2, 0), (2, 2), (0, 2)])
    assert sq.contains((1, 1))
    assert not sq.contains((3, 1))
    d = ConvexRegion.disk((0, 0), 1.0)
    assert d.signed_distance((0, 0)) == pytest.approx(-1.0)
    assert d.signed_distance((2, 0)) == pytest.approx(1.0)


def test_region_rejects_clockwise():
    with pytest.raises(GeometryError):
        ConvexRegion.polygon([(0, 0), (0, 2), (2, 2), (2, 0)])


# ---------------------------------------------------------------------------
# obstacles
# ---------------------------------------------------------------------------

def test_obstacle_distances_disk_and_square():
    disk = Obstacle.disk((0, 0), 1.0)
    assert obstacle_distances(disk, [(3, 0), (0, 0.5)]) == pytest.approx([2.0, 0.0])
    sq = Obstacle.polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    got = obstacle_distances(sq, [(2, 0.5), (2, 2), (0.5, 0.5)])
    assert got == pytest.approx([1.0, math.sqrt(2), 0.0])


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_obstacle_distances_matches_closest_point(x, y):
    poly = Obstacle.polygon([(0, 0), (2, 0.3), (2.5, 2), (0.4, 1.8)])
    d_vec = float(obstacle_distances(poly, (x, y))[0])
    _, d_ref = poly.closest_point((x, y))
    assert d_vec == pytest.approx(max(d_ref, 0.0), abs=1e-12)


def test_visible_extremes_disk_tangents():
    disk = Obstacle.disk((5, 0), 3.0)
    p1, p2, ang = visible_extremes(disk, (0, 0))
    # tangent length 4, half angle asin(3/5)
    assert chord_length((0, 0), p1) == pytest.approx(4.0)
    assert chord_length((0, 0), p2) == pytest.approx(4.0)
    assert ang == pytest.approx(2 * math.asin(0.6))
    assert p1[1] < 0 < p2[1]


def test_visible_extremes_inside_raises():
    with pytest.raises(GeometryError):
        visible_extremes(Obstacle.disk((0, 0), 1.0), (0.2, 0))


def test_obstacle_gap_symmetric_and_exact():
    a = Obstacle.disk((0, 0), 1.0)
    b = Obstacle.polygon([(3, -1), (5, -1), (5, 1), (3, 1)])
    g1, g2 = obstacle_gap(a, b), obstacle_gap(b, a)
    assert g1.d == g2.d == pytest.approx(2.0)
    assert not g1.touching


def test_obstacle_gap_overlap_raises():
    with pytest.raises(GeometryError):
        obstacle_gap(Obstacle.disk((0, 0), 1.0), Obstacle.disk((1.5, 0), 1.0))


def test_nonconvex_polygon_rejected():
    with pytest.raises(GeometryError):
        Obstacle.polygon([(0, 0), (2, 0), (1, 0.3), (1, 2)])
