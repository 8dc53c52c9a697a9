"""Source/sink force-field navigation among moving convex obstacles.

Visible obstacle points repel the robot with an inverse-square law. Free gaps
between neighbouring obstacles are seeded with virtual sink particles that
attract it. The resultant is a displacement applied blind over one sojourn
interval, gated so that the robot never covers half the distance to the
nearest visible point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, StateError
from .geometry import Obstacle, as_xy, obstacle_distances

DISJOINT_FACTOR = 2 * math.sqrt(3.0)


@dataclass(frozen=True)
class ForceParams:
    """Field constants; lengths in meters, ``dt`` in seconds.

    ``gain`` is the common value of the repulsive and attractive constants
    times the charge product (charges are equal, so one number suffices).
    """
    epsilon: float
    dt: float = 0.01
    gain: float = 1.0
    charge: float = 1.0
    n_sink: int = 8
    sensing_radius: float = 5.0
    robot_radius: float = 0.1
    v_max: float = 1.0
    max_force: float = 1e6

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not self.dt > 0 or not self.v_max > 0:
            raise ConfigError("dt and v_max must be positive")
        if self.n_sink < 2:
            raise ConfigError("need at least two sink intervals")
        if self.gain <= 0 or self.sensing_radius <= 0 or self.robot_radius < 0:
            raise ConfigError("gain and sensing radius must be positive")

    @property
    def psi(self):
        return self.gain * self.charge * self.charge


class FieldSample(NamedTuple):
    repulsive: np.ndarray
    attractive: np.ndarray
    force: np.ndarray           # gated resultant (displacement for one step)
    heading: float
    magnitude: float
    nearest: float              # nearest visible distance
    gated: bool
    sinks: np.ndarray


# ---------------------------------------------------------------------------
# Visibility
# ---------------------------------------------------------------------------

def _outline(obs: Obstacle, n_disk=64):
    """Boundary points and outward normals (vertices for polygons)."""
    if obs.is_disk:
        t = np.linspace(0, 2 * math.pi, n_disk, endpoint=False)
        nrm = np.stack([np.cos(t), np.sin(t)], -1)
        return np.asarray(obs.center, float) + obs.radius * nrm, nrm
    v = obs.vertices()
    # vertex normal: bisector of the two adjacent edge normals
    e = np.roll(v, -1, axis=0) - v
    en = np.stack([e[:, 1], -e[:, 0]], -1)
    en /= np.hypot(*en.T)[:, None]
    vn = en + np.roll(en, 1, axis=0)
    vn /= np.hypot(*vn.T)[:, None]
    return v, vn


def visible_points(pos, obs: Obstacle, radius):
    """Boundary points facing ``pos`` within ``radius``, ordered by bearing."""
    pos = as_xy(pos)
    pts, nrm = _outline(obs)
    rel = pts - pos
    d = np.hypot(*rel.T)
    sel = (np.einsum("ij,ij->i", -rel, nrm) > 0) & (d <= radius)
    p = pts[sel]
    if len(p) == 0:
        return p
    c = np.asarray(obs.center, float) - pos
    ref = math.atan2(c[1], c[0])
    ang = np.arctan2(p[:, 1] - pos[1], p[:, 0] - pos[0])
    rel_b = (ang - ref + math.pi) % (2 * math.pi) - math.pi
    return p[np.argsort(rel_b, kind="stable")]


def obstacles_disjoint(gap, robot_radius) -> bool:
    """True iff the gap between tangent extremes is at least 2*sqrt(3)*r."""
    return bool(gap >= DISJOINT_FACTOR * robot_radius)


def sink_particles(a, b, n) -> np.ndarray:
    """The n - 1 interior points splitting segment a-b into n equal parts."""
    a, b = as_xy(a), as_xy(b)
    if n < 2:
        raise ConfigError("n must be at least 2")
    f = np.arange(1, n)[:, None] / n
    return a + f * (b - a)


# ---------------------------------------------------------------------------
# Forces
# ---------------------------------------------------------------------------

def _inverse_square(pos, pts, psi, max_force, sign):
    """Sum of psi/d^2 pulls toward ``pts`` (sign=+1) or pushes away (-1)."""
    if len(pts) == 0:
        return np.zeros(2)
    rel = np.asarray(pts, float) - pos
    d = np.hypot(*rel.T)
    tiny = d < 1e-6
    safe = np.where(tiny, 1.0, d)
    mag = np.where(tiny, max_force, np.minimum(psi / safe ** 2, max_force))
    u = rel / safe[:, None]
    if tiny.any():
        u[tiny] = np.array([1.0, 0.0])
    return sign * (mag[:, None] * u).sum(axis=0)


def repulsive_force(pos, points, psi=1.0, max_force=1e6) -> np.ndarray:
    """Each point pushes the robot directly away from itself."""
    return _inverse_square(as_xy(pos), points, psi, max_force, -1.0)


def attractive_force(pos, sinks, psi=1.0, max_force=1e6) -> np.ndarray:
    return _inverse_square(as_xy(pos), sinks, psi, max_force, 1.0)


def pair_gap(a: Obstacle, b: Obstacle) -> float:
    """Distance between two convex obstacles (0 when they overlap)."""
    if a.is_disk and b.is_disk:
        d = math.hypot(*(np.asarray(a.center) - np.asarray(b.center)))
        return max(d - a.radius - b.radius, 0.0)
    if a.is_disk or b.is_disk:
        disk, poly = (a, b) if a.is_disk else (b, a)
        return max(float(obstacle_distances(poly, disk.center)[0]) - disk.radius, 0.0)
    # for convex polygons the minimum is attained at a vertex of one of them
    return float(min(obstacle_distances(b, a.vertices()).min(),
                     obstacle_distances(a, b.vertices()).min()))


class MergeTracker:
    """Remembers obstacle pairs that have come closer than the disjoint gap."""

    def __init__(self):
        self.merged: set[tuple[int, int]] = set()

    def update(self, obstacles, params):
        need = DISJOINT_FACTOR * params.robot_radius
        for i in range(len(obstacles)):
            for j in range(i + 1, len(obstacles)):
                if (i, j) in self.merged:
                    continue
                a, b = obstacles[i], obstacles[j]
                far = math.hypot(*(np.asarray(a.center) - np.asarray(b.center)))
                if far - a.extent() - b.extent() >= need:
                    continue
                if not obstacles_disjoint(pair_gap(a, b), params.robot_radius):
                    self.merged.add((i, j))

    def fused(self, i, j):
        return (min(i, j), max(i, j)) in self.merged


def field_sinks(pos, views, params, merges: MergeTracker | None = None):
    """Sink particles in the gaps between bearing-adjacent visible obstacles."""
    pos = as_xy(pos)
    if len(views) < 2:
        return np.zeros((0, 2))
    keys = []
    for j, p in views:
        mid = p.mean(axis=0) - pos
        keys.append(math.atan2(mid[1], mid[0]))
    order = np.argsort(keys, kind="stable")
    out = []
    for a, b in zip(order, np.roll(order, -1)):
        if a == b:
            continue
        ja, pa = views[a]
        jb, pb = views[b]
        if merges is not None and merges.fused(ja, jb):
            continue
        da = pa[-1] - pos
        db = pb[0] - pos
        sweep = (math.atan2(db[1], db[0]) - math.atan2(da[1], da[0])) % (2 * math.pi)
        if sweep >= math.pi:
            continue        # wrap-around pair: not a gap in front of the robot
        gap = float(math.hypot(*(pb[0] - pa[-1])))
        if obstacles_disjoint(gap, params.robot_radius):
            out.append(sink_particles(pa[-1], pb[0], params.n_sink))
    return np.vstack(out) if out else np.zeros((0, 2))


def gate(force, nearest, params: ForceParams):
    """Limit the step: below half the nearest distance, else nearest/2 - eps."""
    mag = float(math.hypot(*force))
    if mag == 0:
        return force, False
    if mag < nearest / 2:
        return force, False
    lim = max(nearest / 2 - params.epsilon, 0.0)
    return force * (lim / mag), True


def total_force(pos, obstacles, params: ForceParams, merges=None) -> FieldSample:
    """Gated resultant of repulsion and gap attraction at ``pos``.

    The ungated resultant is first capped at ``v_max * dt`` (the robot's
    reach in one sojourn interval) and then passed through :func:`gate`.
    """
    pos = as_xy(pos)
    views = []
    for j, o in enumerate(obstacles):
        p = visible_points(pos, o, params.sensing_radius)
        if len(p):
            views.append((j, p))
    if not views:
        z = np.zeros(2)
        return FieldSample(z, z, z, 0.0, 0.0, math.inf, False, np.zeros((0, 2)))
    pts = np.vstack([p for _, p in views])
    nearest = float(min(np.hypot(*(pts - pos).T).min(),
                        min(float(obstacle_distances(o, pos)[0]) for o in obstacles)))
    sinks = field_sinks(pos, views, params, merges)
    fr = repulsive_force(pos, pts, params.psi, params.max_force)
    fa = attractive_force(pos, sinks, params.psi, params.max_force)
    f = fr + fa
    mag = math.hypot(*f)
    reach = params.v_max * params.dt
    if mag > reach:
        f = f * (reach / mag)
    f, gated = gate(f, nearest, params)
    return FieldSample(fr, fa, f, math.atan2(f[1], f[0]), float(math.hypot(*f)),
                       nearest, gated, sinks)


def field_step(pos, sample: FieldSample):
    """Displace the robot by the gated resultant (no sensing meanwhile)."""
    return as_xy(pos) + sample.magnitude * np.array([math.cos(sample.heading),
                                                     math.sin(sample.heading)])


def sojourn_diagnostic(r_hat, d, v_obs):
    """(2 r d + pi r^2) / v: reported only, its units are area over speed."""
    if v_obs <= 0:
        return math.inf
    return (2 * r_hat * abs(d) + math.pi * r_hat ** 2) / v_obs


# ---------------------------------------------------------------------------
# Scenario runner
# ---------------------------------------------------------------------------

@dataclass
class FieldWorld:
    robot: np.ndarray
    obstacles: list
    params: ForceParams
    arena: tuple = (-10.0, -10.0, 10.0, 10.0)
    turn_sigma: float = 0.0
    seed: int = 0
    t: float = 0.0
    merges: MergeTracker = field(default_factory=MergeTracker)

    def __post_init__(self):
        self.robot = as_xy(self.robot).copy()
        self.rng = np.random.default_rng(self.seed)
        for o in self.obstacles:
            if math.hypot(*o.velocity) > self.params.v_max * (1 + 1e-12):
                raise ConfigError("obstacle faster than the robot")

    def _bounce(self, o: Obstacle) -> Obstacle:
        x0, y0, x1, y1 = self.arena
        c = np.asarray(o.center, float)
        v = np.asarray(o.velocity, float)
        if self.turn_sigma > 0:
            a = self.rng.normal(0.0, self.turn_sigma * math.sqrt(self.params.dt))
            ca, sa = math.cos(a), math.sin(a)
            v = np.array([ca * v[0] - sa * v[1], sa * v[0] + ca * v[1]])
        ext = o.extent()
        if (c[0] - ext < x0 and v[0] < 0) or (c[0] + ext > x1 and v[0] > 0):
            v[0] = -v[0]
        if (c[1] - ext < y0 and v[1] < 0) or (c[1] + ext > y1 and v[1] > 0):
            v[1] = -v[1]
        return Obstacle(center=o.center, radius=o.radius, local=o.local, angle=o.angle,
                        velocity=tuple(v), name=o.name)

    def step(self, substeps=4):
        """One sojourn interval; returns (sample, min clearance over the interval)."""
        p = self.params
        self.merges.update(self.obstacles, p)
        s = total_force(self.robot, self.obstacles, p, self.merges)
        new = field_step(self.robot, s)
        moved = [self._bounce(o) for o in self.obstacles]
        f = np.linspace(0, 1, substeps + 1)[:, None]
        x = self.robot + f * (new - self.robot)
        worst = math.inf
        for o in moved:
            # obstacles translate, so shift the robot samples the other way
            rel = x - f * p.dt * np.asarray(o.velocity)
            worst = min(worst, float(obstacle_distances(o, rel).min()))
        self.robot = new
        self.obstacles = [o.moved(p.dt) for o in moved]
        self.t += p.dt
        return s, worst

    def run(self, steps, record_every=1):
        """Returns dict with per-step clearance and the robot path."""
        clear, path = [], [self.robot.copy()]
        for k in range(steps):
            _, c = self.step()
            clear.append(c)
            if (k + 1) % record_every == 0:
                path.append(self.robot.copy())
        return {"clearance": np.array(clear), "path": np.array(path),
                "min_clearance": float(min(clear)) if clear else math.inf}


def safety_check(clearances, epsilon):
    """(ok, min clearance, first offending step or None)."""
    c = np.asarray(clearances, float)
    if len(c) == 0:
        raise StateError("empty run")
    bad = np.nonzero(c < epsilon)[0]
    return bool(len(bad) == 0), float(c.min()), (int(bad[0]) if len(bad) else None)


def reference_layout_world(seed=0, epsilon=0.5, dt=0.01, v_max=1.0, speed_frac=(0.4, 0.8),
                           turn_sigma=1.0):
    """Robot at the origin; three ellipses and a disk converge from around it."""
    rng = np.random.default_rng(seed)
    shapes = []
    base = rng.uniform(0, 2 * math.pi)
    for k in range(4):
        ang = base + k * math.pi / 2 + rng.uniform(-0.3, 0.3)
        dist = rng.uniform(3.0, 4.5)
        c = (dist * math.cos(ang), dist * math.sin(ang))
        speed = v_max * rng.uniform(*speed_frac)
        head = ang + math.pi + rng.uniform(-0.5, 0.5)
        vel = (speed * math.cos(head), speed * math.sin(head))
        if k < 3:
            shapes.append(Obstacle.ellipse(c, rng.uniform(0.8, 1.4), rng.uniform(0.4, 0.8),
                                           rng.uniform(0, math.pi), velocity=vel, name=f"E{k}"))
        else:
            shapes.append(Obstacle.disk(c, rng.uniform(0.5, 0.9), velocity=vel, name="D"))
    params = ForceParams(epsilon=epsilon, dt=dt, v_max=v_max)
    return FieldWorld(np.zeros(2), shapes, params, turn_sigma=turn_sigma, seed=seed)
