"""Fixed-step deterministic simulation of interception scenarios.

Every run is a pure function of (scenario, seed): all randomness comes from
a ``numpy.random.Generator`` seeded per run, and traces serialize floats via
``repr`` so replays are byte-identical.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import intercept_boundary as ib
from . import siege as sg
from .errors import ConfigError, StateError
from .geometry import ConvexRegion, ParamCurve

log = logging.getLogger(__name__)

TIE_WARN_STEPS = 10


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

def _plain(x):
    """Convert numpy containers/scalars to JSON-friendly Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def scenario_hash(scenario) -> str:
    return hashlib.sha256(canonical_json(scenario).encode()).hexdigest()


class SimTrace:
    """Header plus an ordered list of step and event records."""

    def __init__(self, header):
        self.header = dict(header)
        self.records = []

    def add_step(self, t, **data):
        self.records.append({"type": "step", "t": t, **data})

    def add_event(self, t, kind, **data):
        self.records.append({"type": "event", "t": t, "event": kind, **data})

    def steps(self):
        return [r for r in self.records if r["type"] == "step"]

    def events(self, kind=None):
        return [r for r in self.records
                if r["type"] == "event" and (kind is None or r["event"] == kind)]

    def to_jsonl(self) -> str:
        lines = [canonical_json({"type": "header", **self.header})]
        lines += [canonical_json(r) for r in self.records]
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text):
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("type") != "header":
            raise StateError("trace has no header record")
        head = dict(rows[0])
        head.pop("type")
        tr = cls(head)
        tr.records = rows[1:]
        return tr

    @classmethod
    def read(cls, path):
        with open(path) as fh:
            return cls.from_jsonl(fh.read())


# ---------------------------------------------------------------------------
# Intruder motion and crossing detection
# ---------------------------------------------------------------------------

def _unit(v):
    n = math.hypot(v[0], v[1])
    return np.zeros(2) if n == 0 else np.asarray(v, dtype=float) / n


def detect_crossing(region: ConvexRegion, p0, p1, iters=80):
    """Fraction ``tau`` of the move p0 -> p1 at which the region is left.

    The signed distance changes sign across the boundary; the crossing is
    located by bisection. Returns ``None`` when p1 is still inside.
    """
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    if region.signed_distance(p1) <= 0:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if region.signed_distance(p0 + mid * (p1 - p0)) <= 0:
            lo = mid
        else:
            hi = mid
    return hi, p0 + hi * (p1 - p0)


def locate_on_curves(curves, point):
    """(curve index, arc coordinate) of the first curve through ``point``."""
    for j, cv in enumerate(curves):
        s, _, d = cv.project(point)
        if d <= max(cv.tol, 1e-9):
            return j, s
    return None


class WorstCase:
    """Straight dash to the current worst boundary point, re-planned periodically."""
    name = "worst_case"

    def __init__(self, replan=10):
        self.replan = replan
        self.target = None
        self.count = 0

    def velocity(self, world, idx, rng):
        if self.target is None or self.count % self.replan == 0:
            self.target = np.asarray(world.worst_target(idx), dtype=float)
        self.count += 1
        pos = world.intruder_pos[idx]
        d = _unit(self.target - pos)
        if not d.any():
            d = world.outward(idx, self.target)
        return world.v_i * d


class RandomWalk:
    """Noisy heading toward a random boundary point, redrawn now and then."""
    name = "random_walk"

    def __init__(self, redraw=0.02, sigma=0.6):
        self.redraw = redraw
        self.sigma = sigma
        self.target = None

    def velocity(self, world, idx, rng):
        if self.target is None or rng.uniform() < self.redraw:
            self.target = world.random_boundary_point(rng)
        d = self.target - world.intruder_pos[idx]
        ang = math.atan2(d[1], d[0]) + rng.normal(0.0, self.sigma)
        return world.v_i * np.array([math.cos(ang), math.sin(ang)])


class Waypoints:
    """Scripted feints: visit the given points in order, then keep heading on."""
    name = "waypoints"

    def __init__(self, points):
        self.points = [np.asarray(p, float) for p in points]
        self.j = 0
        self.heading = None

    def velocity(self, world, idx, rng):
        pos = world.intruder_pos[idx]
        while self.j < len(self.points) and np.linalg.norm(self.points[self.j] - pos) < 1e-9:
            self.j += 1
        if self.j < len(self.points):
            d = self.points[self.j] - pos
            dist = math.hypot(*d)
            self.heading = _unit(d)
            if dist < world.v_i * world.dt:
                # land exactly on the waypoint
                if self.j < len(self.points) - 1:
                    self.j += 1
                    return d / world.dt
        return world.v_i * self.heading


def intruder_strategy(name, **kw):
    """Factory: 'worst_case', 'random_walk' or 'waypoints'."""
    if name == "worst_case":
        return WorstCase(**kw)
    if name == "random_walk":
        return RandomWalk(**kw)
    if name == "waypoints":
        return Waypoints(**kw)
    raise ConfigError(f"unknown intruder strategy {name!r}")


def default_dt(epsilon, v_max):
    """Largest step with v_max * dt <= epsilon / 10."""
    return epsilon / (10.0 * v_max)


# ---------------------------------------------------------------------------
# Boundary world
# ---------------------------------------------------------------------------

class BoundaryWorld:
    """Robots on an open boundary curve, one intruder inside the region.

    The defended curve must be part of the region's boundary. Leaving the
    region anywhere else is not allowed: the intruder is stopped at the wall.
    """
    kind = "boundary"

    def __init__(self, curve: ParamCurve, region: ConvexRegion, coords, v_r, v_i,
                 intruder_pos, k=1, epsilon=1.0, dt=None, t0=0.0, strategy=None,
                 seed=0, method="auto", record_w=True):
        self.team = ib.BoundaryTeam(curve, np.array(coords, float), v_r, k, epsilon)
        self.region = region
        self.v_r, self.v_i = float(v_r), float(v_i)
        self.dt = dt if dt is not None else default_dt(epsilon, max(v_r, v_i))
        self.t = 0.0
        self.t0 = t0
        self.step_index = 0
        self.intruder_pos = [np.array(intruder_pos, float)]
        if not region.contains(self.intruder_pos[0]):
            raise StateError("intruder must start inside the region")
        self.strategy = strategy or WorstCase()
        self.rng = np.random.default_rng(seed)
        self.method = method
        self.record_w = record_w
        self.done = False
        self.crossing = None
        self.tie_count = np.zeros(self.team.n, dtype=int)
        self.trace = None

    # hooks used by strategies
    def intruder(self, idx=0):
        return ib.IntruderState(tuple(self.intruder_pos[idx]), self.v_i, self.t0)

    def worst_target(self, idx):
        return ib.worst_case_intruder_target(self.team, self.intruder(idx), self.method)

    def outward(self, idx, point):
        s = self.team.curve.project(point)[0]
        tx, ty = self.team.curve.tangent(s)
        n = np.array([ty, -tx])
        probe = np.asarray(point) + 1e-6 * self.team.length * n
        return n if not self.region.contains(probe) else -n

    def random_boundary_point(self, rng):
        return self.team.curve.points_at(rng.uniform(0.0, self.team.length))

    def lyapunov(self):
        return ib.lyapunov_w(self.team, self.intruder(), self.method)

    # dynamics
    def step(self):
        """Advance one fixed step; returns the list of events raised."""
        if self.done:
            return []
        events = []
        dt = self.dt
        team = self.team
        if self.t >= self.t0:
            u, ties = ib.control_detail(team, self.intruder(), self.method)
        else:
            u, ties = np.zeros(team.n), np.zeros(team.n, dtype=bool)
        self.tie_count = np.where(ties, self.tie_count + 1, 0)
        for j in np.nonzero(self.tie_count == TIE_WARN_STEPS + 1)[0]:
            log.warning("robot %d tied for more than %d steps", j, TIE_WARN_STEPS)
            events.append(("tie_persist", {"robot": int(j)}))
        u = np.clip(u, -self.v_r, self.v_r)
        c_old = team.coords
        c_new, clamps = ib.integrate_coords(c_old, u, dt, team.length, team.k)
        for a, b, m in clamps:
            events.append(("order_clamp", {"robots": [a, b], "coord": m}))

        vel = np.asarray(self.strategy.velocity(self, 0, self.rng), dtype=float)
        sp = math.hypot(*vel)
        if sp > self.v_i:
            vel *= self.v_i / sp
        p0 = self.intruder_pos[0]
        p1 = p0 + vel * dt
        hit = detect_crossing(self.region, p0, p1)
        if hit is not None:
            tau, x = hit
            where = locate_on_curves([team.curve], x)
            if where is None:
                p1 = p0 + (tau - 1e-9) * (p1 - p0)
                events.append(("wall", {"pos": p1}))
            else:
                c_star = c_old + tau * (c_new - c_old)
                ok, wit = ib.intercept_check(team.with_coords(c_star), s=where[1])
                self.crossing = {"t_cross": self.t + tau * dt, "s": where[1], "pos": x,
                                 "intercepted": ok, "witnesses": wit,
                                 "coords": c_star}
                events.append(("crossing", self.crossing))
                p1 = x
                self.done = True
        self.team = team.with_coords(c_new)
        self.intruder_pos[0] = p1
        self.t = (self.step_index + 1) * dt
        self.step_index += 1
        self._last_u = u
        return events

    def run(self, max_steps=20000, header=None, record_every=1):
        tr = SimTrace(header or {})
        self.trace = tr
        w0 = self.lyapunov() if self.record_w else None
        tr.add_step(0.0, coords=self.team.coords, intruder=self.intruder_pos[0], w=w0)
        while not self.done and self.step_index < max_steps:
            evs = self.step()
            for kind, data in evs:
                tr.add_event(self.t, kind, **data)
            if self.step_index % record_every == 0 or self.done:
                w = self.lyapunov() if (self.record_w and not self.done) else None
                tr.add_step(self.t, coords=self.team.coords, intruder=self.intruder_pos[0],
                            u=self._last_u, w=w)
        return tr


# ---------------------------------------------------------------------------
# Siege world
# ---------------------------------------------------------------------------

class SiegeWorld:
    """Two robot groups on the arcs of a siege ring, one or more intruders inside.

    ``strategy`` is a zero-argument factory; every intruder gets its own
    instance so per-intruder plans do not interfere.
    """
    kind = "siege"

    def __init__(self, ring, coords1, coords2, v_r, v_i, intruders, epsilon=1.0,
                 dt=None, eta_mode="normalized", strategy=None, seed=0, method="auto"):
        self.ring = ring
        self.team = sg.SiegeTeam(coords1, coords2, v_r, epsilon)
        self.v_r, self.v_i = float(v_r), float(v_i)
        self.dt = dt if dt is not None else default_dt(epsilon, max(v_r, v_i))
        self.eta_mode = eta_mode
        self.intruder_pos = [np.array(p, float) for p in np.atleast_2d(intruders)]
        for p in self.intruder_pos:
            if not ring.region.contains(p):
                raise StateError("intruders must start inside the ring")
        factory = strategy or WorstCase
        self.strategies = [factory() for _ in self.intruder_pos]
        self.active = [True] * len(self.intruder_pos)
        self.rng = np.random.default_rng(seed)
        self.method = method
        self.t = 0.0
        self.step_index = 0
        self.crossings = []
        self.done = False
        self._last_u = (np.zeros(len(self.team.coords1)), np.zeros(len(self.team.coords2)))

    def intruder_set(self, only=None):
        idx = [j for j, a in enumerate(self.active) if a] if only is None else [only]
        pts = np.array([self.intruder_pos[j] for j in idx])
        return sg.IntruderSet(pts, self.v_i, self.eta_mode)

    # hooks used by strategies
    def worst_target(self, idx):
        return sg.ring_worst_target(self.ring, self.team, self.intruder_set(idx), 0,
                                    self.method)

    def outward(self, idx, point):
        p = np.asarray(point, float)
        h = 1e-6 * self.ring.diameter
        sd = self.ring.region.signed_distance
        g = np.array([sd(p + [h, 0]) - sd(p - [h, 0]), sd(p + [0, h]) - sd(p - [0, h])])
        return _unit(g)

    def random_boundary_point(self, rng):
        arc = self.ring.arcs[int(rng.integers(2))]
        return arc.points_at(rng.uniform(0.0, arc.length))

    def step(self):
        if self.done:
            return []
        events = []
        dt = self.dt
        team = self.team
        v1, v2 = sg.ring_velocities(self.ring, team, self.intruder_set(), self.method)
        old = (team.coords1, team.coords2)
        new = []
        for arc, (c, v) in enumerate(zip(old, (v1, v2))):
            v = np.clip(v, -self.v_r, self.v_r)
            cn, clamps = ib.integrate_coords(c, v, dt, self.ring.arcs[arc].length)
            for a, b, m in clamps:
                events.append(("order_clamp", {"arc": arc, "robots": [a, b], "coord": m}))
            new.append(cn)
        for j, alive in enumerate(self.active):
            if not alive:
                continue
            vel = np.asarray(self.strategies[j].velocity(self, j, self.rng), dtype=float)
            sp = math.hypot(*vel)
            if sp > self.v_i:
                vel *= self.v_i / sp
            p0 = self.intruder_pos[j]
            p1 = p0 + vel * dt
            hit = detect_crossing(self.ring.region, p0, p1)
            if hit is not None:
                tau, x = hit
                where = locate_on_curves(self.ring.arcs, x)
                if where is None:
                    raise StateError("crossing point is not on either ring arc")
                arc, s = where
                star = [c.copy() for c in new]
                star[arc] = old[arc] + tau * (new[arc] - old[arc])
                ok, wit = sg.escape_check(
                    self.ring, sg.SiegeTeam(star[0], star[1], self.v_r, team.epsilon),
                    arc=arc, s=s)
                rec = {"intruder": j, "t_cross": self.t + tau * dt, "arc": arc, "s": s,
                       "pos": x, "intercepted": ok, "witnesses": wit}
                self.crossings.append(rec)
                events.append(("crossing", rec))
                p1 = x
                self.active[j] = False
            self.intruder_pos[j] = p1
        self.team = sg.SiegeTeam(new[0], new[1], self.v_r, team.epsilon)
        self._last_u = (v1, v2)
        self.step_index += 1
        self.t = self.step_index * dt
        self.done = not any(self.active)
        return events

    def run(self, max_steps=20000, header=None, record_every=1):
        tr = SimTrace(header or {})
        tr.add_step(0.0, coords1=self.team.coords1, coords2=self.team.coords2,
                    intruders=self.intruder_pos)
        while not self.done and self.step_index < max_steps:
            for kind, data in self.step():
                tr.add_event(self.t, kind, **data)
            if self.step_index % record_every == 0 or self.done:
                tr.add_step(self.t, coords1=self.team.coords1, coords2=self.team.coords2,
                            intruders=self.intruder_pos, u1=self._last_u[0],
                            u2=self._last_u[1])
        return tr


# ---------------------------------------------------------------------------
# Batches
# ---------------------------------------------------------------------------

def thread_count(requested=None):
    cap = os.environ.get("PURSUIT_GUARD_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def run_batch(fn, seeds, threads=None):
    """Run ``fn(seed)`` for every seed; results come back in seed order.

    Each run owns its own generator, so the outcome does not depend on the
    thread count or scheduling.
    """
    seeds = list(seeds)
    n = thread_count(threads)
    if n == 1 or len(seeds) < 2:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, seeds))
