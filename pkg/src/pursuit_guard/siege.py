"""Siege-ring interception of one or several intruders trapped inside a ring.

The ring is split at two points into arc S1 (P1 -> P2, counter-clockwise)
and arc S2 (P2 -> P1, counter-clockwise). Robots never change arcs. Each arc
runs the single-interceptor boundary law on its own; coordinates on S2 are
measured from P2.

With several intruders the distance term of the danger functional is a
weighted combination ``eta`` of the intruder distances. Weights fall off
linearly with distance relative to the ring diameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import intercept_boundary as ib
from .errors import ConfigError, StateError
from .geometry import ConvexRegion, ParamCurve, Point2, as_xy

ETA_MODES = ("normalized", "printed", "nearest")


class SiegeRing:
    def __init__(self, arc1: ParamCurve, arc2: ParamCurve, region: ConvexRegion,
                 diameter=None):
        self.arcs = (arc1, arc2)
        self.region = region
        self.diameter = float(diameter) if diameter is not None else region.diameter()
        if self.diameter <= 0:
            raise ConfigError("ring diameter must be positive")

    @classmethod
    def circle(cls, center, radius, b1, b2, diameter=None):
        """Circular ring split at polar angles b1 < b2 (radians)."""
        if not b1 < b2 < b1 + 2 * math.pi:
            raise ConfigError("need b1 < b2 < b1 + 2*pi")
        c = as_xy(center)
        a1 = ParamCurve.circle_arc(c, radius, b1, b2)
        a2 = ParamCurve.circle_arc(c, radius, b2, b1 + 2 * math.pi)
        return cls(a1, a2, ConvexRegion.disk(c, radius), diameter)

    @classmethod
    def polar(cls, r, b1, b2, dr=None, diameter=None):
        """Star-shaped ring x = r(b)(cos b, sin b) around the origin."""
        a1 = ParamCurve.polar(r, b1, b2, dr=dr)
        a2 = ParamCurve.polar(r, b2, b1 + 2 * math.pi, dr=dr)
        boundary = ParamCurve.polar(r, 0.0, 2 * math.pi, dr=dr, closed=True)

        def sdf(p):
            return math.hypot(p[0], p[1]) - float(r(math.atan2(p[1], p[0])))

        return cls(a1, a2, ConvexRegion(boundary, sdf=sdf), diameter)

    @property
    def P1(self):
        return self.arcs[0].P1

    @property
    def P2(self):
        return self.arcs[0].P2


@dataclass
class SiegeTeam:
    """Robots on both arcs; ``coords2`` are measured from P2 along S2."""
    coords1: np.ndarray
    coords2: np.ndarray
    v_r_max: float
    epsilon: float

    def __post_init__(self):
        self.coords1 = np.sort(np.asarray(self.coords1, dtype=float))
        self.coords2 = np.sort(np.asarray(self.coords2, dtype=float))
        if len(self.coords1) == 0 or len(self.coords2) == 0:
            raise ConfigError("each arc needs at least one robot")

    def coords(self, arc):
        return self.coords1 if arc == 0 else self.coords2

    @property
    def n(self):
        return len(self.coords1) + len(self.coords2)


@dataclass
class IntruderSet:
    positions: np.ndarray
    v_i_max: float
    eta_mode: str = "normalized"

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.eta_mode not in ETA_MODES:
            raise ConfigError(f"eta_mode must be one of {ETA_MODES}")

    @property
    def m(self):
        return len(self.positions)


# ---------------------------------------------------------------------------
# Projection, weights and danger
# ---------------------------------------------------------------------------

class RingPoint(NamedTuple):
    arc: int
    s: float
    point: Point2

def ring_projection(ring: SiegeRing, x):
    """Closest ring point to an intruder inside the ring as a :class:`RingPoint`.

    Ties (e.g. the centre of a circle) go to S1, then to the smaller coordinate.
    """
    x = as_xy(x)
    if not ring.region.contains(x):
        raise StateError("intruder is outside the siege ring")
    best = []
    for a, cv in enumerate(ring.arcs):
        d = np.hypot(*(cv.nodes - x).T)
        best.append(d)
    dmin = min(d.min() for d in best)
    tol = 1e-9 * ring.diameter
    for a, d in enumerate(best):
        near = np.nonzero(d <= dmin + tol)[0]
        if len(near):
            cv = ring.arcs[a]
            if len(near) > 2:
                # degenerate: a whole stretch is equidistant
                s = float(cv.s_nodes[near[0]])
            else:
                s = cv.project(x)[0]
            return RingPoint(a, s, Point2(*cv.points_at(s)))
    raise StateError("projection failed")


def intruder_weights(alphas, diameter):
    """psi = 1 - clamp(alpha / D_R, 0, 1): near intruders weigh more."""
    a = np.asarray(alphas, dtype=float)
    return 1.0 - np.clip(a / diameter, 0.0, 1.0)


def eta_values(ring: SiegeRing, intruders: IntruderSet, pts) -> np.ndarray:
    """Weighted intruder distance at each point of ``pts`` (shape (N, 2))."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    diff = pts[:, None, :] - intruders.positions[None, :, :]
    alpha = np.hypot(diff[..., 0], diff[..., 1])
    if intruders.eta_mode == "nearest":
        return alpha.min(axis=1)
    psi = intruder_weights(alpha, ring.diameter)
    num = np.sum(psi * alpha, axis=1)
    if intruders.eta_mode == "printed":
        return num / intruders.m
    den = psi.sum(axis=1)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), alpha.min(axis=1))


def ring_kernel(ring, team, intruders, arc, s):
    """xi(s) - eta(s) V_R / V_I on one arc (vectorized in ``s``)."""
    s = np.asarray(s, dtype=float)
    c = team.coords(arc)
    xi = np.min(np.abs(s[..., None] - c), axis=-1)
    pts = ring.arcs[arc].points_at(s.ravel())
    eta = eta_values(ring, intruders, pts).reshape(s.shape)
    return xi - eta * team.v_r_max / intruders.v_i_max


def _arc_team(ring, team, arc):
    return ib.BoundaryTeam(ring.arcs[arc], team.coords(arc), team.v_r_max, 1, team.epsilon)


def ring_segments(ring: SiegeRing, team: SiegeTeam, arc: int, i: int):
    """Responsibility intervals of robot ``i`` on ``arc`` in that arc's coordinates."""
    return ib.responsibility_segments(_arc_team(ring, team, arc), i)


def _use_endpoints(team, intruders, method):
    if method == "endpoint":
        return True
    if method == "sample":
        return False
    return intruders.v_i_max >= team.v_r_max


def _sampled_sup(ring, team, intruders, arc, seg, n=512):
    if seg is None or seg[1] < seg[0]:
        return -math.inf, None
    a, b = seg
    s = np.linspace(a, b, n) if b > a else np.array([a])
    v = ring_kernel(ring, team, intruders, arc, s)
    j = int(np.argmax(v))
    lo, hi = s[max(j - 1, 0)], s[min(j + 1, len(s) - 1)]
    if hi > lo:
        xs, fs = ib._golden_max(lambda x: float(ring_kernel(ring, team, intruders, arc, x)),
                                lo, hi, 1e-6 * ring.arcs[arc].length)
        if fs > v[j]:
            return fs, xs
    return float(v[j]), float(s[j])


def ring_dangers(ring, team, intruders, arc, method="auto"):
    """{robot: (H_minus, H_plus, s_minus, s_plus)} on one arc, own-arc orientation."""
    c = team.coords(arc)
    L = ring.arcs[arc].length
    n = len(c)
    out = {}
    if _use_endpoints(team, intruders, method):
        sm = np.array([0.0] + [0.5 * (c[i - 1] + c[i]) for i in range(1, n)])
        sp = np.array([0.5 * (c[i] + c[i + 1]) for i in range(n - 1)] + [L])
        hm = ring_kernel(ring, team, intruders, arc, sm)
        hp = ring_kernel(ring, team, intruders, arc, sp)
        for i in range(n):
            out[i] = (float(hm[i]), float(hp[i]), float(sm[i]), float(sp[i]))
        return out
    for i in range(n):
        seg = ring_segments(ring, team, arc, i)
        vm, sm = _sampled_sup(ring, team, intruders, arc, seg.minus)
        vp, sp = _sampled_sup(ring, team, intruders, arc, seg.plus)
        out[i] = (vm, vp, sm, sp)
    return out


# ---------------------------------------------------------------------------
# Law, feasibility, capture test
# ---------------------------------------------------------------------------

def ring_control_law(ring, team, intruders, method="auto"):
    """Commands ``(u1, u2)`` in the ring's sign convention.

    S1 robots: +V when the minus side is less dangerous. S2 robots use the
    inverted rule (+V when the minus side is more dangerous), because their
    positive direction points back from P1 toward P2. Use
    :func:`ring_velocities` for rates of the stored coordinates.
    """
    V = team.v_r_max
    tol = 1e-9 * max(a.length for a in ring.arcs)
    res = []
    for arc in (0, 1):
        h = ring_dangers(ring, team, intruders, arc, method)
        u = np.zeros(len(team.coords(arc)))
        for i, (hm, hp, _, _) in h.items():
            if abs(hm - hp) <= tol:
                continue
            toward_plus = hm < hp
            if arc == 1:
                u[i] = -V if toward_plus else V
            else:
                u[i] = V if toward_plus else -V
        res.append(u)
    return res[0], res[1]


def ring_velocities(ring, team, intruders, method="auto"):
    """Rates of change of ``coords1`` and ``coords2``."""
    u1, u2 = ring_control_law(ring, team, intruders, method)
    return u1, -u2


def ring_margin(ring, team, intruders, method="auto"):
    """(value, arc, s) of the danger supremum over both arcs."""
    best = (-math.inf, 0, 0.0)
    for arc in (0, 1):
        for hm, hp, sm, sp in ring_dangers(ring, team, intruders, arc, method).values():
            for v, s in ((hm, sm), (hp, sp)):
                if v > best[0] + 1e-12:
                    best = (v, arc, s)
    return best


def ring_feasibility(ring, team, intruders, method="auto"):
    """(feasible, margin): feasible iff the danger supremum is <= epsilon."""
    m = ring_margin(ring, team, intruders, method)[0]
    return bool(m <= team.epsilon), float(m)


def ring_worst_target(ring, team, intruders, idx, method="auto") -> Point2:
    """Best escape point for intruder ``idx`` judged by its own distance only."""
    solo = IntruderSet(intruders.positions[idx:idx + 1], intruders.v_i_max, "nearest")
    _, arc, s = ring_margin(ring, team, solo, method)
    return Point2(*ring.arcs[arc].points_at(s))


def escape_check(ring, team, crossing_point=None, arc=None, s=None):
    """True iff some robot on the crossing's arc is within epsilon of it.

    Returns ``(intercepted, witnesses)`` with witnesses as (arc, index) pairs.
    """
    if arc is None:
        p = as_xy(crossing_point)
        cands = []
        for a, cv in enumerate(ring.arcs):
            sa, _, d = cv.project(p)
            cands.append((d, a, sa))
        d, arc, s = min(cands)
        if d > 1e-6 * ring.diameter:
            raise StateError("crossing point is not on the ring")
    c = team.coords(arc)
    wit = [(arc, int(j)) for j in np.nonzero(np.abs(c - s) <= team.epsilon * (1 + 1e-12))[0]]
    return len(wit) > 0, wit
