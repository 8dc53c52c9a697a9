"""Planar geometry kernel.

Curves are stored as dense samples with a precomputed cumulative arc length.
Analytic curves keep their generating function so that points and coordinates
are exact up to quadrature accuracy rather than polyline accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, GeometryError, NumericError


class Point2(NamedTuple):
    x: float
    y: float


def as_xy(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"non-finite point {p!r}")
    return a


def chord_length(x, p) -> float:
    """Euclidean distance between two planar points."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    return float(math.hypot(x[0] - p[0], x[1] - p[1]))


def _point_segment(p, a, b):
    """Closest point on segment ab to p, and its distance."""
    ab = b - a
    den = float(ab @ ab)
    t = 0.0 if den == 0.0 else min(1.0, max(0.0, float((p - a) @ ab) / den))
    q = a + t * ab
    return q, math.hypot(p[0] - q[0], p[1] - q[1])


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


class ParamCurve:
    """Arc-length parameterized planar curve running from ``P1`` to ``P2``.

    Build with one of the constructors: :meth:`polyline`, :meth:`segment`,
    :meth:`circle_arc`, :meth:`polar` or :meth:`from_function`.
    Instances are treated as immutable.
    """

    def __init__(self, nodes, s_nodes, func=None, t_nodes=None, speed=None,
                 closed=False, tol_rel=1e-6):
        self.nodes = np.asarray(nodes, dtype=float)
        self.s_nodes = np.asarray(s_nodes, dtype=float)
        self.length = float(self.s_nodes[-1])
        if not self.length > 0:
            raise GeometryError("curve has zero length")
        self.closed = closed
        self.tol = tol_rel * self.length
        self._func = func
        if func is not None:
            self._t_nodes = np.asarray(t_nodes, dtype=float)
            self._t_of_s = CubicHermiteSpline(self.s_nodes, self._t_nodes, 1.0 / speed)
            self._s_of_t = CubicHermiteSpline(self._t_nodes, self.s_nodes, speed)
        self.nodes.setflags(write=False)
        self.s_nodes.setflags(write=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def polyline(cls, points, closed=False, tol_rel=1e-6):
        pts = np.asarray(points, dtype=float)
        if closed and not np.allclose(pts[0], pts[-1]):
            pts = np.vstack([pts, pts[:1]])
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise GeometryError("polyline needs at least two 2D points")
        seg = np.hypot(*np.diff(pts, axis=0).T)
        keep = np.concatenate([[True], seg > 0])
        pts = pts[keep]
        s = np.concatenate([[0.0], np.cumsum(seg[seg > 0])])
        return cls(pts, s, closed=closed, tol_rel=tol_rel)

    @classmethod
    def segment(cls, p1, p2):
        return cls.polyline([as_xy(p1), as_xy(p2)])

    @classmethod
    def from_function(cls, func, t0, t1, deriv=None, spacing_rel=1e-3,
                      closed=False, tol_rel=1e-6):
        """Sample ``func(t)`` (vectorized, returns (m, 2)) on ``[t0, t1]``."""
        if deriv is None:
            h = 1e-6 * (t1 - t0)

            def deriv(t):
                t = np.asarray(t, dtype=float)
                return (func(t + h) - func(t - h)) / (2 * h)
        n = int(math.ceil(1.0 / spacing_rel))
        # refine until the node spacing in arc length meets the target
        for _ in range(4):
            t = np.linspace(t0, t1, n + 1)
            a, b = t[:-1], t[1:]
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            tq = mid[:, None] + half[:, None] * _GL_X[None, :]
            sp = np.linalg.norm(deriv(tq.ravel()), axis=1).reshape(tq.shape)
            ds = half * (sp @ _GL_W)
            total = ds.sum()
            if ds.max() <= spacing_rel * total * 1.5:
                break
            n = int(n * ds.max() / (spacing_rel * total)) + 1
        if not np.all(np.isfinite(ds)):
            raise NumericError("non-finite curve speed")
        s = np.concatenate([[0.0], np.cumsum(ds)])
        speed = np.linalg.norm(deriv(t), axis=1)
        if np.any(speed <= 0):
            raise GeometryError("curve must be regular (non-zero speed)")
        nodes = func(t)
        return cls(nodes, s, func=func, t_nodes=t, speed=speed,
                   closed=closed, tol_rel=tol_rel)

    @classmethod
    def circle_arc(cls, center, radius, a0, a1, **kw):
        """Arc of a circle from angle ``a0`` to ``a1``; CCW when a1 > a0."""
        c = as_xy(center)
        sgn = 1.0 if a1 >= a0 else -1.0

        def f(t):
            b = a0 + sgn * np.asarray(t, dtype=float)
            return np.stack([c[0] + radius * np.cos(b), c[1] + radius * np.sin(b)], -1)

        def df(t):
            b = a0 + sgn * np.asarray(t, dtype=float)
            return sgn * np.stack([-radius * np.sin(b), radius * np.cos(b)], -1)

        return cls.from_function(f, 0.0, abs(a1 - a0), deriv=df, **kw)

    @classmethod
    def polar(cls, r, beta0, beta1, dr=None, **kw):
        """Curve x = r(b) cos b, y = r(b) sin b for b from beta0 to beta1 (CCW)."""

        def f(b):
            b = np.asarray(b, dtype=float)
            rb = np.asarray(r(b), dtype=float) * np.ones_like(b)
            return np.stack([rb * np.cos(b), rb * np.sin(b)], -1)

        deriv = None
        if dr is not None:
            def deriv(b):
                b = np.asarray(b, dtype=float)
                rb = np.asarray(r(b), dtype=float) * np.ones_like(b)
                d = np.asarray(dr(b), dtype=float) * np.ones_like(b)
                return np.stack([d * np.cos(b) - rb * np.sin(b),
                                 d * np.sin(b) + rb * np.cos(b)], -1)
        return cls.from_function(f, beta0, beta1, deriv=deriv, **kw)

    # -- queries ------------------------------------------------------------
    @property
    def P1(self):
        return Point2(*self.nodes[0])

    @property
    def P2(self):
        return Point2(*self.nodes[-1])

    def points_at(self, s) -> np.ndarray:
        """Vectorized arc_point without range checks beyond clipping."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        if self._func is not None:
            t = np.clip(self._t_of_s(s), self._t_nodes[0], self._t_nodes[-1])
            return np.asarray(self._func(t), dtype=float)
        x = np.interp(s, self.s_nodes, self.nodes[:, 0])
        y = np.interp(s, self.s_nodes, self.nodes[:, 1])
        return np.stack([x, y], -1)

    def sample(self, n) -> tuple[np.ndarray, np.ndarray]:
        s = np.linspace(0.0, self.length, n)
        return s, self.points_at(s)

    def project(self, p):
        """Nearest point on the curve: (s, point, distance)."""
        p = as_xy(p)
        a, b = self.nodes[:-1], self.nodes[1:]
        ab = b - a
        den = np.einsum("ij,ij->i", ab, ab)
        den = np.where(den == 0, 1.0, den)
        t = np.clip(np.einsum("ij,ij->i", p - a, ab) / den, 0.0, 1.0)
        q = a + t[:, None] * ab
        d = np.hypot(*(q - p).T)
        j = int(np.argmin(d))
        if self._func is None:
            s = self.s_nodes[j] + t[j] * (self.s_nodes[j + 1] - self.s_nodes[j])
            return float(s), q[j], float(d[j])
        tn = self._t_nodes
        lo, hi = tn[max(j - 1, 0)], tn[min(j + 2, len(tn) - 1)]

        def dist2(tt):
            r = np.asarray(self._func(np.array([tt])), dtype=float)[0] - p
            return float(r @ r)

        res = optimize.minimize_scalar(dist2, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-13 * max(1.0, abs(hi - lo))})
        tt = float(res.x)
        # ends of the curve are candidates too
        cands = [(dist2(tt), tt), (dist2(tn[0]), tn[0]), (dist2(tn[-1]), tn[-1])]
        d2, tt = min(cands)
        s = float(np.clip(self._s_of_t(tt), 0.0, self.length))
        q = np.asarray(self._func(np.array([tt])), dtype=float)[0]
        return s, q, math.sqrt(d2)

    def tangent(self, s) -> np.ndarray:
        h = 1e-6 * self.length
        a = self.points_at(max(s - h, 0.0))
        b = self.points_at(min(s + h, self.length))
        v = b - a
        return v / np.linalg.norm(v)


def arc_point(curve: ParamCurve, s: float) -> Point2:
    """Point at arc coordinate ``s`` measured from ``P1``."""
    if not (np.isfinite(s) and -1e-12 * curve.length <= s <= curve.length * (1 + 1e-12)):
        raise DomainError(f"arc coordinate {s} outside [0, {curve.length}]")
    return Point2(*curve.points_at(s))


def arc_coord(curve: ParamCurve, p) -> float:
    """Arc coordinate of an on-curve point; near-curve points are projected."""
    s, _, d = curve.project(p)
    if d > curve.tol:
        raise GeometryError(f"point {tuple(p)} is {d:.3g} from the curve (tol {curve.tol:.3g})")
    return s


def polar_arc_length(r: Callable, beta1: float, beta2: float, dr: Callable | None = None) -> float:
    """Length of the polar curve r(b) for b in [beta1, beta2], by adaptive quadrature."""
    if beta2 < beta1:
        raise DomainError("beta1 must not exceed beta2")
    if dr is None:
        h = 1e-6

        def dr(b):
            return (r(b + h) - r(b - h)) / (2 * h)

    def integrand(b):
        v = math.sqrt(float(r(b)) ** 2 + float(dr(b)) ** 2)
        if not math.isfinite(v):
            raise NumericError(f"non-finite integrand at beta={b}")
        return v

    val, _ = integrate.quad(integrand, beta1, beta2, epsabs=1e-12, epsrel=1e-12, limit=500)
    return float(val)


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

class ConvexRegion:
    """Closed convex region bounded by a counter-clockwise closed curve."""

    def __init__(self, boundary: ParamCurve, vertices=None, sdf=None):
        if not boundary.closed:
            raise GeometryError("region boundary must be closed")
        self.boundary = boundary
        self._sdf = sdf
        pts = boundary.nodes[:-1] if vertices is None else np.asarray(vertices, dtype=float)
        self._poly = pts
        e = np.diff(np.vstack([pts, pts[:1]]), axis=0)
        cr = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        area2 = np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
        if area2 <= 0:
            raise GeometryError("region boundary must be counter-clockwise")
        scale = float(np.max(np.hypot(*e.T))) ** 2
        if np.any(cr < -1e-9 * scale):
            raise GeometryError("region is not convex")
        self._normals = np.stack([e[:, 1], -e[:, 0]], -1) / np.hypot(*e.T)[:, None]
        self._offsets = np.einsum("ij,ij->i", self._normals, pts)

    @classmethod
    def polygon(cls, vertices):
        v = np.asarray(vertices, dtype=float)
        return cls(ParamCurve.polyline(v, closed=True), vertices=v)

    @classmethod
    def disk(cls, center, radius):
        c = as_xy(center)
        b = ParamCurve.circle_arc(c, radius, 0.0, 2 * math.pi, closed=True)
        return cls(b, sdf=lambda p: math.hypot(p[0] - c[0], p[1] - c[1]) - radius)

    @classmethod
    def polar(cls, r, dr=None):
        return cls(ParamCurve.polar(r, 0.0, 2 * math.pi, dr=dr, closed=True))

    def signed_distance(self, p) -> float:
        """Negative inside. Exact for polygons and disks, polyline-accurate otherwise."""
        p = as_xy(p)
        if self._sdf is not None:
            return float(self._sdf(p))
        _, _, d = self.boundary.project(p)
        return -d if self.contains(p) else d

    def contains(self, p) -> bool:
        p = as_xy(p)
        if self._sdf is not None:
            return self._sdf(p) <= 0
        return bool(np.all(self._normals @ p - self._offsets <= 1e-12))

    def diameter(self) -> float:
        from scipy.spatial.distance import pdist
        pts = self._poly
        if len(pts) > 1500:
            pts = pts[:: int(math.ceil(len(pts) / 1500))]
        return float(pdist(pts).max())


# ---------------------------------------------------------------------------
# Obstacles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Obstacle:
    """Convex polygon or disk with a pose and a constant velocity.

    ``local`` holds polygon vertices in the body frame (CCW); ``radius`` is
    set for disks. ``center``/``angle`` give the pose.
    """
    center: tuple
    radius: float | None = None
    local: tuple | None = None
    angle: float = 0.0
    velocity: tuple = (0.0, 0.0)
    name: str = ""
    _verts: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if (self.radius is None) == (self.local is None):
            raise GeometryError("obstacle is either a disk or a polygon")
        if self.radius is not None and not self.radius > 0:
            raise GeometryError("disk radius must be positive")
        if self.local is not None:
            loc = np.asarray(self.local, dtype=float)
            if len(loc) < 3:
                raise GeometryError("polygon needs three vertices")
            c, s = math.cos(self.angle), math.sin(self.angle)
            rot = np.array([[c, -s], [s, c]])
            v = loc @ rot.T + np.asarray(self.center, dtype=float)
            e = np.diff(np.vstack([v, v[:1]]), axis=0)
            cr = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
            if np.all(cr < 0):
                v = v[::-1]
                cr = -cr[::-1]
            if np.any(cr <= 0):
                raise GeometryError("polygon must be strictly convex")
            v.setflags(write=False)
            object.__setattr__(self, "_verts", v)

    @classmethod
    def disk(cls, center, radius, velocity=(0.0, 0.0), name=""):
        return cls(center=tuple(map(float, center)), radius=float(radius),
                   velocity=tuple(map(float, velocity)), name=name)

    @classmethod
    def polygon(cls, vertices, velocity=(0.0, 0.0), name=""):
        v = np.asarray(vertices, dtype=float)
        c = v.mean(axis=0)
        return cls(center=tuple(c), local=tuple(map(tuple, v - c)),
                   velocity=tuple(map(float, velocity)), name=name)

    @classmethod
    def ellipse(cls, center, a, b, angle=0.0, n=64, velocity=(0.0, 0.0), name=""):
        """Ellipse approximated by an inscribed ``n``-gon."""
        t = np.linspace(0, 2 * math.pi, n, endpoint=False)
        loc = np.stack([a * np.cos(t), b * np.sin(t)], -1)
        return cls(center=tuple(map(float, center)), local=tuple(map(tuple, loc)),
                   angle=float(angle), velocity=tuple(map(float, velocity)), name=name)

    @property
    def is_disk(self):
        return self.radius is not None

    def vertices(self) -> np.ndarray:
        return self._verts

    def moved(self, dt) -> "Obstacle":
        c = np.asarray(self.center) + dt * np.asarray(self.velocity)
        return Obstacle(center=tuple(c), radius=self.radius, local=self.local,
                        angle=self.angle, velocity=self.velocity, name=self.name)

    def closest_point(self, p):
        """(closest boundary point, signed distance) -- negative inside."""
        p = as_xy(p)
        if self.is_disk:
            c = np.asarray(self.center, dtype=float)
            v = p - c
            d = math.hypot(*v)
            u = v / d if d > 0 else np.array([1.0, 0.0])
            return c + self.radius * u, d - self.radius
        v = self._verts
        best = None
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            q, d = _point_segment(p, a, b)
            if best is None or d < best[1]:
                best = (q, d)
        return best[0], (-best[1] if self.contains(p) else best[1])

    def distance(self, p) -> float:
        return self.closest_point(p)[1]

    def contains(self, p, strict=False) -> bool:
        p = as_xy(p)
        if self.is_disk:
            d = math.hypot(*(p - np.asarray(self.center)))
            return d < self.radius if strict else d <= self.radius
        v = self._verts
        e = np.roll(v, -1, axis=0) - v
        cr = e[:, 0] * (p[1] - v[:, 1]) - e[:, 1] * (p[0] - v[:, 0])
        return bool(np.all(cr > 0)) if strict else bool(np.all(cr >= 0))

    def boundary_samples(self, n=64) -> np.ndarray:
        if self.is_disk:
            t = np.linspace(0, 2 * math.pi, n, endpoint=False)
            return np.asarray(self.center) + self.radius * np.stack([np.cos(t), np.sin(t)], -1)
        return self._verts.copy()

    def extent(self) -> float:
        """Radius of the smallest origin-centred circle containing the shape."""
        if self.is_disk:
            return self.radius
        return float(np.max(np.hypot(*(self._verts - np.asarray(self.center)).T)))


def obstacle_distances(obs: Obstacle, points) -> np.ndarray:
    """Exact distance from each point to the obstacle (0 inside)."""
    p = np.atleast_2d(np.asarray(points, float))
    if obs.is_disk:
        return np.maximum(np.hypot(*(p - np.asarray(obs.center, float)).T) - obs.radius, 0.0)
    v = obs.vertices()
    a, b = v, np.roll(v, -1, axis=0)
    e = b - a
    w = p[:, None, :] - a[None]
    t = np.clip(np.einsum("nkj,kj->nk", w, e) / np.einsum("kj,kj->k", e, e), 0, 1)
    q = a[None] + t[..., None] * e[None]
    d = np.hypot(*(p[:, None, :] - q).transpose(2, 0, 1)).min(axis=1)
    cr = e[None, :, 0] * w[..., 1] - e[None, :, 1] * w[..., 0]
    inside = np.all(cr >= 0, axis=1)
    return np.where(inside, 0.0, d)


def visible_extremes(obs: Obstacle, pos):
    """Tangent points of the obstacle seen from ``pos``.

    Returns ``(p_first, p_last, angle)`` where p_last is reached from p_first
    by a counter-clockwise sweep of the viewing ray.
    """
    pos = as_xy(pos)
    if obs.contains(pos):
        raise GeometryError("viewpoint lies inside or on the obstacle")
    if obs.is_disk:
        c = np.asarray(obs.center, dtype=float)
        d = math.hypot(*(c - pos))
        half = math.asin(obs.radius / d)
        phi = math.atan2(c[1] - pos[1], c[0] - pos[0])
        ell = math.sqrt(max(d * d - obs.radius ** 2, 0.0))
        a, b = phi - half, phi + half
        p1 = pos + ell * np.array([math.cos(a), math.sin(a)])
        p2 = pos + ell * np.array([math.cos(b), math.sin(b)])
        return Point2(*p1), Point2(*p2), 2 * half
    v = obs.vertices()
    c = v.mean(axis=0)
    phi = math.atan2(c[1] - pos[1], c[0] - pos[0])
    ang = np.arctan2(v[:, 1] - pos[1], v[:, 0] - pos[0]) - phi
    ang = (ang + math.pi) % (2 * math.pi) - math.pi
    i, j = int(np.argmin(ang)), int(np.argmax(ang))
    return Point2(*v[i]), Point2(*v[j]), float(ang[j] - ang[i])


class Gap(NamedTuple):
    d: float
    seg: tuple
    touching: bool


def _polys_overlap(va, vb) -> bool:
    """Separating-axis test for convex polygons (touching counts as no overlap)."""
    for v in (va, vb):
        e = np.roll(v, -1, axis=0) - v
        for n in np.stack([e[:, 1], -e[:, 0]], -1):
            pa, pb = va @ n, vb @ n
            if pa.max() <= pb.min() or pb.max() <= pa.min():
                return False
    return True


def _gap_ordered(a: Obstacle, b: Obstacle):
    """Gap with ``a`` and ``b`` in canonical order (disk before polygon)."""
    if a.is_disk and b.is_disk:
        ca, cb = np.asarray(a.center, float), np.asarray(b.center, float)
        v = cb - ca
        dist = math.hypot(*v)
        d = dist - (a.radius + b.radius)
        if d < 0:
            raise GeometryError("obstacles overlap")
        u = v / dist
        return d, (ca + a.radius * u, cb - b.radius * u)
    if a.is_disk:
        c = np.asarray(a.center, float)
        if b.contains(c):
            raise GeometryError("obstacles overlap")
        q, dist = b.closest_point(c)
        d = dist - a.radius
        if d < 0:
            raise GeometryError("obstacles overlap")
        u = (q - c) / dist
        return d, (c + a.radius * u, q)
    va, vb = a.vertices(), b.vertices()
    if _polys_overlap(va, vb):
        raise GeometryError("obstacles overlap")
    best = None
    for p, poly, flip in ((va, vb, False), (vb, va, True)):
        for x in p:
            for e0, e1 in zip(poly, np.roll(poly, -1, axis=0)):
                q, d = _point_segment(x, e0, e1)
                if best is None or d < best[0]:
                    best = (d, (q, x) if flip else (x, q))
    return best


def obstacle_gap(a: Obstacle, b: Obstacle, touch_tol=1e-12) -> Gap:
    """Minimal separating segment between two disjoint obstacles.

    The segment runs from ``a`` to ``b``; the distance is symmetric exactly.
    """
    swap = b.is_disk and not a.is_disk
    d, seg = _gap_ordered(b, a) if swap else _gap_ordered(a, b)
    if swap:
        seg = (seg[1], seg[0])
    seg = (Point2(*seg[0]), Point2(*seg[1]))
    scale = max(a.extent(), b.extent(), 1.0)
    return Gap(float(d), seg, bool(d <= touch_tol * scale))
