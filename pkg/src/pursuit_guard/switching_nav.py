"""Sojourn-time switching navigation among static convex obstacles.

A robot measures its surroundings only at switching points, plans one
straight move, and then travels blind until the next switching point. Three
flavours share the same sensing model:

* single-obstacle stepping for a leader with followers (``law="single"``),
* a leader passing between two obstacles (``law="chain"``),
* independent robots using the component-form gap law (``law="gap"``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import BlockedError, ConfigError, GeometryError, StateError
from .geometry import Obstacle, as_xy, obstacle_distances

LAWS = ("single", "chain", "gap")

# numbers quoted for the decentralized energy example
REF_PATH_DM = 28.0
REF_SPEED_MM_S = 500.0
REF_PACKET_MS = 100.0
REF_BASELINE = 256
REF_SWITCHES = 8


@dataclass(frozen=True)
class SwitchingParams:
    """Clearance target, tolerance and sensing horizon (meters).

    ``noise`` is the amplitude of the injected range error; ``mu0`` is the
    clearance tolerance the planner is allowed to eat into.
    """
    epsilon: float
    mu0: float
    sensing_radius: float
    robot_radius: float = 0.0
    kappa: float = 1.5
    noise: float = 0.0
    max_retries: int = 4
    law: str = "single"

    def __post_init__(self):
        if not self.epsilon > self.mu0 >= 0:
            raise ConfigError("need epsilon > mu0 >= 0")
        if not self.sensing_radius > self.epsilon:
            raise ConfigError("sensing radius must exceed epsilon")
        if self.robot_radius < 0 or self.noise < 0:
            raise ConfigError("robot radius and noise must be non-negative")
        if self.kappa < 1:
            raise ConfigError("kappa must be >= 1")
        if self.law not in LAWS:
            raise ConfigError(f"law must be one of {LAWS}")

    @property
    def midpoint_offset(self):
        """Perpendicular offset at the chord midpoint (2*eps for gap, else eps)."""
        return 2 * self.epsilon if self.law == "gap" else self.epsilon

    @property
    def end_offset(self):
        # similar triangles: the offset at p2 doubles the midpoint one
        return 2 * self.midpoint_offset


# ---------------------------------------------------------------------------
# Sensing
# ---------------------------------------------------------------------------

class ObstacleView(NamedTuple):
    """What one scan reveals about one obstacle."""
    index: int
    points: np.ndarray      # visible boundary samples, sorted by bearing
    right: np.ndarray       # extreme with the smallest bearing
    left: np.ndarray        # extreme with the largest bearing
    nearest: np.ndarray
    distance: float
    bearing: float          # bearing of the nearest point (world frame)


def _dense_boundary(obs: Obstacle, spacing):
    """Boundary samples with outward normals."""
    if obs.is_disk:
        n = max(64, int(math.ceil(2 * math.pi * obs.radius / spacing)))
        t = np.linspace(0, 2 * math.pi, n, endpoint=False)
        nrm = np.stack([np.cos(t), np.sin(t)], -1)
        return np.asarray(obs.center, float) + obs.radius * nrm, nrm
    v = obs.vertices()
    pts, nrms = [], []
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        e = b - a
        ln = math.hypot(*e)
        k = max(2, int(math.ceil(ln / spacing)))
        f = np.linspace(0, 1, k, endpoint=False)[:, None]
        pts.append(a + f * e)
        nrms.append(np.tile([e[1] / ln, -e[0] / ln], (k, 1)))
    return np.vstack(pts), np.vstack(nrms)


class Sensor:
    """Range sensor with a call counter.

    Every call to :meth:`scan` is one measurement; robots never call it while
    travelling between switching points.
    """

    def __init__(self, obstacles, radius, noise=0.0, rng=None, spacing=None):
        self.obstacles = list(obstacles)
        self.radius = float(radius)
        self.noise = float(noise)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.spacing = spacing or self.radius / 400
        self._bnd = [_dense_boundary(o, self.spacing) for o in self.obstacles]
        self.calls = 0

    def scan(self, pos) -> list[ObstacleView]:
        self.calls += 1
        pos = as_xy(pos)
        views = []
        for j, (pts, nrm) in enumerate(self._bnd):
            rel = pts - pos
            d = np.hypot(*rel.T)
            facing = np.einsum("ij,ij->i", -rel, nrm) > 0
            sel = facing & (d <= self.radius)
            if not sel.any():
                continue
            p, dd = pts[sel], d[sel]
            if self.noise > 0:
                # range error along the line of sight
                err = self.rng.uniform(-self.noise, self.noise, len(p))
                p = pos + (p - pos) * ((dd + err) / dd)[:, None]
                dd = np.hypot(*(p - pos).T)
            k = int(np.argmin(dd))
            ref = math.atan2(p[k, 1] - pos[1], p[k, 0] - pos[0])
            ang = np.arctan2(p[:, 1] - pos[1], p[:, 0] - pos[0])
            rel_b = (ang - ref + math.pi) % (2 * math.pi) - math.pi
            order = np.argsort(rel_b, kind="stable")
            p = p[order]
            views.append(ObstacleView(j, p, p[0].copy(), p[-1].copy(),
                                      p[int(np.argmin(np.hypot(*(p - pos).T)))].copy(),
                                      float(dd.min()), ref))
        return views


def restrict_views(views, pos, radius):
    """Views clipped to a smaller sensing radius (extremes recomputed)."""
    pos = as_xy(pos)
    out = []
    for v in views:
        keep = np.hypot(*(v.points - pos).T) <= radius
        if not keep.any():
            continue
        p = v.points[keep]
        out.append(v._replace(points=p, right=p[0].copy(), left=p[-1].copy()))
    return out


# ---------------------------------------------------------------------------
# Measurement and single-obstacle step
# ---------------------------------------------------------------------------

class Measurement(NamedTuple):
    p1: np.ndarray          # backward extreme
    p2: np.ndarray          # forward extreme
    chord: float            # L1 = |p1 - p2|
    theta: float            # atan(L3 / L1)
    side: int               # +1: obstacle on the robot's left


def _rot(v, a):
    c, s = math.cos(a), math.sin(a)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _unit(v):
    n = math.hypot(*v)
    if n == 0:
        raise GeometryError("zero-length direction")
    return np.asarray(v, float) / n


def pesa_angle(chord, end_offset):
    """atan(L3 / L1): the corner angle of the right triangle on the chord."""
    if chord <= 0:
        raise GeometryError("chord must be positive")
    return math.atan(end_offset / chord)


def pesa_measure(pos, view: ObstacleView, params: SwitchingParams, side=1) -> Measurement:
    """Extremes, chord and steering angle for passing ``view`` on ``side``.

    side=+1 keeps the obstacle on the left, so the forward extreme is the
    right-hand one; side=-1 mirrors this.
    """
    if side not in (1, -1):
        raise ConfigError("side must be +1 or -1")
    p2, p1 = (view.right, view.left) if side == 1 else (view.left, view.right)
    chord = float(math.hypot(*(p2 - p1)))
    if chord <= 0:
        raise GeometryError("visible chord is degenerate")
    return Measurement(p1, p2, chord, pesa_angle(chord, params.end_offset), side)


def pesa_heading(pos, m: Measurement):
    """Ray toward the forward extreme, turned away from the obstacle by theta."""
    ray = _unit(m.p2 - as_xy(pos))
    return _rot(ray, -m.side * m.theta)


def predicted_clearance(start, end, views, params: SwitchingParams, n=200, horizon=None):
    """Worst-case clearance along a straight move judged from one scan.

    Uses the measured points minus the noise amplitude. With a ``horizon``
    radius the bound horizon - travel for anything unseen is included too.
    """
    start, end = as_xy(start), as_xy(end)
    travel = math.hypot(*(end - start))
    hidden = horizon - travel if horizon is not None else math.inf
    if not views:
        return hidden
    path = start + np.linspace(0, 1, n)[:, None] * (end - start)
    pts = np.vstack([v.points for v in views])
    best = math.inf
    for chunk in np.array_split(pts, max(1, len(pts) // 2000 + 1)):
        d = np.hypot(path[:, None, 0] - chunk[None, :, 0], path[:, None, 1] - chunk[None, :, 1])
        best = min(best, float(d.min()))
    return min(best - params.noise, hidden)


def path_clearance(start, end, obstacles, n=1000):
    """Exact min distance to any obstacle over ``n`` samples of the move."""
    start, end = as_xy(start), as_xy(end)
    path = start + np.linspace(0, 1, n)[:, None] * (end - start)
    if not obstacles:
        return math.inf, None
    per = [float(obstacle_distances(o, path).min()) for o in obstacles]
    j = int(np.argmin(per))
    return per[j], j


# ---------------------------------------------------------------------------
# Gaps
# ---------------------------------------------------------------------------

def gap_admissible(gap, params: SwitchingParams) -> bool:
    """gap >= kappa * 2r * (1 + eps); kappa turns 'much larger' into a number."""
    need = params.kappa * 2 * params.robot_radius * (1 + params.epsilon)
    return bool(gap >= need)


class GapCandidate(NamedTuple):
    width: float
    heading_change: float
    right: int              # view index of the obstacle on the right
    left: int


def gap_select(gaps, params: SwitchingParams) -> GapCandidate:
    """Widest admissible gap; ties go to the smaller heading change."""
    ok = [g for g in gaps if gap_admissible(g.width, params)]
    if not ok:
        raise BlockedError("no admissible gap between visible obstacles")
    tol = 1e-9 * max(1.0, max(g.width for g in ok))
    widest = max(g.width for g in ok)
    tied = [g for g in ok if g.width >= widest - tol]
    return min(tied, key=lambda g: g.heading_change)


def view_gaps(pos, views, goal_bearing):
    """Gaps between bearing-adjacent visible obstacles."""
    pos = as_xy(pos)
    if len(views) < 2:
        return []
    order = sorted(range(len(views)), key=lambda k: views[k].bearing)
    out = []
    for a, b in zip(order, order[1:]):
        va, vb = views[a], views[b]
        w = np.hypot(va.points[:, None, 0] - vb.points[None, :, 0],
                     va.points[:, None, 1] - vb.points[None, :, 1]).min()
        mid = 0.5 * (va.left + vb.right) - pos
        dh = abs((math.atan2(mid[1], mid[0]) - goal_bearing + math.pi) % (2 * math.pi) - math.pi)
        out.append(GapCandidate(float(w), dh, a, b))
    return out


# ---------------------------------------------------------------------------
# Two-obstacle steps
# ---------------------------------------------------------------------------

class DualPlan(NamedTuple):
    heading: np.ndarray
    travel: float
    resultant: float        # printed resultant length of the chosen law
    beta: float             # heading relative to the reference ray


def _angle_between(u, v):
    return math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1])


def dual_step_chain(pos, right: ObstacleView, left: ObstacleView, params) -> DualPlan:
    """Resultant of the two single-obstacle moves toward the gap between them.

    ``right`` is passed on the robot's right, ``left`` on its left. Travel is
    the shorter of the two half chords.
    """
    pos = as_xy(pos)
    mr = pesa_measure(pos, right, params, side=-1)
    ml = pesa_measure(pos, left, params, side=1)
    hr, hl = pesa_heading(pos, mr), pesa_heading(pos, ml)
    vec = 0.5 * mr.chord * hr + 0.5 * ml.chord * hl
    if math.hypot(*vec) == 0:
        vec = hr + hl
    heading = _unit(vec)
    a1, a2 = mr.theta, ml.theta
    res = 0.5 * math.sqrt(max(mr.chord ** 2 + ml.chord ** 2
                              + 2 * mr.chord * ml.chord * math.cos(a1 + a2), 0.0))
    travel = min(mr.chord / 2, ml.chord / 2)
    # heading is reported against the ray to the nearer obstacle's gap extreme
    ref = _unit((right.left if right.distance <= left.distance else left.right) - pos)
    return DualPlan(heading, travel, res, _angle_between(ref, heading))


def dual_step_gap(pos, near: ObstacleView, far: ObstacleView, near_is_right: bool,
                   params) -> DualPlan:
    """Component-form gap move.

    The reference ray points at the gap-facing extreme of the nearer obstacle;
    ``delta`` is the angle it makes with the ray to the gap-facing extreme of
    the farther one.
    """
    pos = as_xy(pos)
    eps = params.epsilon
    s_near = -1 if near_is_right else 1
    m1 = pesa_measure(pos, near, params, side=s_near)
    m2 = pesa_measure(pos, far, params, side=-s_near)
    ref = _unit(m1.p2 - pos)
    delta = abs(_angle_between(ref, m2.p2 - pos))
    alpha3 = delta - m2.theta
    l2 = m2.chord / 2
    x, y = l2 * math.cos(alpha3), l2 * math.sin(alpha3)
    ax, ay = m1.chord / 4 + x, eps + y
    beta = math.atan2(ay, ax)
    length = math.hypot(ax, ay)
    travel = min(length, params.sensing_radius - eps)
    toward_gap = 1 if near_is_right else -1
    return DualPlan(_rot(ref, toward_gap * beta), travel, length, beta)


def compare_dual_laws(pos, right: ObstacleView, left: ObstacleView, params):
    """Both two-obstacle laws on the same geometry (headings in radians)."""
    p9 = dual_step_chain(pos, right, left, params)
    near_is_right = right.distance <= left.distance
    near, far = (right, left) if near_is_right else (left, right)
    p10 = dual_step_gap(pos, near, far, near_is_right, params)
    h9 = math.atan2(p9.heading[1], p9.heading[0])
    h10 = math.atan2(p10.heading[1], p10.heading[0])
    return {"chain_heading": h9, "chain_travel": p9.travel, "chain_resultant": p9.resultant,
            "gap_heading": h10, "gap_travel": p10.travel, "gap_resultant": p10.resultant,
            "heading_difference": (h10 - h9 + math.pi) % (2 * math.pi) - math.pi}


# ---------------------------------------------------------------------------
# One switching step for one robot
# ---------------------------------------------------------------------------

@dataclass
class SwitchingStep:
    index: int
    kind: str               # free | pesa | dual | goal
    start: np.ndarray
    end: np.ndarray
    chord: float
    heading: float
    travel: float
    timestamp: float
    retries: int = 0
    obstacle: int | None = None
    min_clearance: float = math.inf
    per_obstacle: dict = field(default_factory=dict)


@dataclass
class NavState:
    pos: np.ndarray
    goal: np.ndarray
    sides: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)
    done: bool = False
    t: float = 0.0


def _plan(pos, goal, views, params, state: NavState, horizon):
    """(kind, heading, travel, chord, obstacle) for one step."""
    to_goal = goal - pos
    dgoal = math.hypot(*to_goal)
    u_goal = to_goal / dgoal
    free_len = min(dgoal, horizon - params.epsilon)
    floor = params.epsilon - params.mu0
    if predicted_clearance(pos, pos + free_len * u_goal, views, params, horizon=horizon) >= floor:
        return "goal" if free_len >= dgoal else "free", u_goal, free_len, 0.0, None
    probe = pos + horizon * u_goal
    block = [k for k, v in enumerate(views)
             if predicted_clearance(pos, probe, [v], params) < floor
             or v.distance < params.epsilon]
    if not block:
        # blocked only by the horizon bound: creep forward
        return "free", u_goal, free_len, 0.0, None
    k0 = min(block, key=lambda k: views[k].distance)
    gb = math.atan2(u_goal[1], u_goal[0])
    gaps = [g for g in view_gaps(pos, views, gb) if k0 in (g.right, g.left)]
    if gaps and params.law != "single":
        try:
            g = gap_select(gaps, params)
        except BlockedError:
            g = None
        if g is not None and g.heading_change < math.pi / 2:
            r, l = views[g.right], views[g.left]
            if params.law == "chain":
                plan = dual_step_chain(pos, r, l, params)
            else:
                near_is_right = r.distance <= l.distance
                near, far = (r, l) if near_is_right else (l, r)
                plan = dual_step_gap(pos, near, far, near_is_right, params)
            return "dual", plan.heading, plan.travel, plan.resultant, views[k0].index
    v = views[k0]
    side = state.sides.get(v.index)
    if side is None:
        side = _choose_side(pos, v, views, gb, params)
        state.sides[v.index] = side
    m = pesa_measure(pos, v, params, side)
    return "pesa", pesa_heading(pos, m), m.chord / 2, m.chord, v.index


def _choose_side(pos, v, views, goal_bearing, params):
    """Pass on the side whose forward extreme needs the smaller turn."""
    best = None
    for side in (1, -1):
        ext = v.right if side == 1 else v.left
        d = ext - pos
        turn = abs((math.atan2(d[1], d[0]) - goal_bearing + math.pi) % (2 * math.pi) - math.pi)
        key = (round(turn, 12), -side)
        if best is None or key < best[0]:
            best = (key, side)
    return best[1]


def switching_step(state: NavState, sensor: Sensor, params: SwitchingParams,
                   obstacles=None, dt_per_m=1.0, goal_tol=1e-9) -> SwitchingStep:
    """Measure once, plan, and travel blind to the next switching point.

    A plan whose predicted clearance falls below eps - mu0 is re-measured
    with halved travel, at most ``max_retries`` times.
    """
    if state.done:
        raise StateError("robot already reached its goal")
    pos = state.pos
    travel_cap = None
    horizon = params.sensing_radius
    for attempt in range(params.max_retries + 1):
        views = sensor.scan(pos)
        if attempt:
            # the retry looks less far ahead, which shortens the chord and
            # steers further away from the obstacle
            horizon = max(horizon / 2, params.epsilon)
            views = restrict_views(views, pos, horizon)
        kind, h, travel, chord, obs = _plan(pos, state.goal, views, params, state, horizon)
        if travel_cap is not None:
            travel = min(travel, travel_cap)
        travel = min(travel, params.sensing_radius)
        end = pos + travel * h
        pred = predicted_clearance(pos, end, views, params)
        # never plan below the floor, nor below where the robot already is
        now = min((v.distance for v in views), default=math.inf) - params.noise
        if pred >= min(params.epsilon - params.mu0, now) or kind == "goal":
            break
        travel_cap = travel / 2
    else:
        raise BlockedError(f"no safe move after {params.max_retries} retries")
    rec = SwitchingStep(len(state.steps), kind, pos.copy(), end, chord,
                        math.atan2(h[1], h[0]), travel, state.t, attempt, obs)
    if obstacles is not None:
        for j, o in enumerate(obstacles):
            rec.per_obstacle[j] = path_clearance(pos, end, [o])[0]
        rec.min_clearance = min(rec.per_obstacle.values(), default=math.inf)
    state.steps.append(rec)
    state.pos = end
    state.t += travel * dt_per_m
    if kind == "goal" or math.hypot(*(state.goal - end)) <= goal_tol:
        state.done = True
    return rec


# ---------------------------------------------------------------------------
# Leader-follower chain
# ---------------------------------------------------------------------------

@dataclass
class ChainTeam:
    """Leader at index 0 followed by robots in fixed order."""
    positions: np.ndarray
    spacing: float
    robot_radius: float = 0.0
    links: np.ndarray | None = None     # links[k] False: k lost its predecessor
    events: list = field(default_factory=list)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, float)).copy()
        if self.spacing <= 2 * self.robot_radius:
            raise ConfigError("spacing must exceed 2r")
        if self.links is None:
            self.links = np.ones(len(self.positions), dtype=bool)

    @classmethod
    def line(cls, leader, direction, n, spacing, robot_radius=0.0):
        u = _unit(direction)
        pts = [as_xy(leader) - k * spacing * u for k in range(n)]
        return cls(np.array(pts), spacing, robot_radius)

    def break_link(self, k):
        if k <= 0 or k >= len(self.positions):
            raise ConfigError("only followers have a predecessor link")
        self.links[k] = False


def follower_update(team: ChainTeam, previous) -> np.ndarray:
    """Move every follower toward its predecessor's previous switching point.

    ``previous`` holds all poses before the leader's latest move. Each
    follower's travel is capped by its predecessor's hop. A follower with a
    broken link holds position and an event is logged.
    """
    prev = np.asarray(previous, float)
    new = team.positions.copy()
    hop = np.zeros(len(new))
    hop[0] = math.hypot(*(new[0] - prev[0]))
    for k in range(1, len(new)):
        if not team.links[k]:
            team.events.append({"event": "link_broken", "robot": k})
            hop[k] = 0.0
            continue
        target = prev[k - 1]
        d = target - prev[k]
        dist = math.hypot(*d)
        step = min(dist, hop[k - 1])
        if step > 0:
            new[k] = prev[k] + d / dist * step
        hop[k] = step
    team.positions = new
    return new


def run_chain(obstacles, leader_goal, team: ChainTeam, params: SwitchingParams,
              max_steps=50, seed=0, sensor=None):
    """Leader navigates with :func:`switching_step`; followers trail it."""
    sensor = sensor or Sensor(obstacles, params.sensing_radius, params.noise,
                              np.random.default_rng(seed))
    state = NavState(team.positions[0].copy(), as_xy(leader_goal))
    poses = [team.positions.copy()]
    min_pair = math.inf
    while not state.done and len(state.steps) < max_steps:
        prev = team.positions.copy()
        switching_step(state, sensor, params, obstacles)
        team.positions[0] = state.pos
        follower_update(team, prev)
        poses.append(team.positions.copy())
        p = team.positions
        if len(p) > 1:
            min_pair = min(min_pair, float(np.hypot(*(p[1:] - p[:-1]).T).min()))
    return {"steps": state.steps, "poses": poses, "sensor_calls": sensor.calls,
            "done": state.done, "min_pair_distance": min_pair, "events": team.events}


def run_decentralized(obstacles, starts, goals, params: SwitchingParams,
                      max_steps=50, seed=0):
    """Independent robots, each with its own sensor and goal."""
    out = []
    for i, (s, g) in enumerate(zip(starts, goals)):
        sensor = Sensor(obstacles, params.sensing_radius, params.noise,
                        np.random.default_rng([seed, i]))
        state = NavState(as_xy(s), as_xy(g))
        while not state.done and len(state.steps) < max_steps:
            switching_step(state, sensor, params, obstacles)
        out.append({"steps": state.steps, "sensor_calls": sensor.calls, "done": state.done})
    return out


def clearance_stats(steps, kinds=("pesa", "dual")):
    """(min, mean) of per-step path clearance over obstacle-engaged steps."""
    vals = [s.min_clearance for s in steps if s.kind in kinds]
    if not vals:
        return math.inf, math.inf
    return float(min(vals)), float(np.mean(vals))


# ---------------------------------------------------------------------------
# Energy accounting
# ---------------------------------------------------------------------------

def sensing_power(c0, c1, f_s):
    """Linear sensing power model p = c0 + c1 * f."""
    return c0 + c1 * f_s


def energy_report(switch_points, speed, packet_period, c0=0.0, c1=1.0):
    """Switching computations against a fixed-rate packet baseline.

    ``switch_points`` are the poses where the robot measured. Path length is
    summed between consecutive points; the baseline is path time divided by
    the packet period.
    """
    pts = np.atleast_2d(np.asarray(switch_points, float)) if len(switch_points) else np.zeros((0, 2))
    if speed <= 0 or packet_period <= 0:
        raise ConfigError("speed and packet period must be positive")
    length = float(np.hypot(*np.diff(pts, axis=0).T).sum()) if len(pts) > 1 else 0.0
    duration = length / speed
    baseline = duration / packet_period
    n_sw = len(pts) if length > 0 else 0
    return {
        "path_length": length,
        "duration": duration,
        "baseline_samples": baseline,
        "switching_computations": n_sw,
        "reduction_factor": baseline / n_sw if n_sw else math.inf,
        "sensing_power_continuous": sensing_power(c0, c1, 1.0 / packet_period),
        "sensing_power_switching": sensing_power(c0, c1, n_sw / duration if duration else 0.0),
    }


def reference_energy_example():
    """The decentralized robot-1 figures: 28 dm at 0.5 m/s, 100 ms packets."""
    length = REF_PATH_DM / 10
    pts = np.stack([np.linspace(0, length, REF_SWITCHES), np.zeros(REF_SWITCHES)], -1)
    rep = energy_report(pts, REF_SPEED_MM_S / 1000, REF_PACKET_MS / 1000)
    rep["quoted_baseline"] = REF_BASELINE
    rep["quoted_switches"] = REF_SWITCHES
    rep["baseline_matches_quote"] = abs(rep["baseline_samples"] - REF_BASELINE) < 0.5
    return rep
