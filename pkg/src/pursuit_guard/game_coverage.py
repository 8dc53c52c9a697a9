"""Game-based patrolling of a 3x3 corridor with a sweeping baseline.

Sensors hop between the cells of a square split into nine sub-squares of
side sqrt(2)*R, so a sensor at a cell centre covers the whole cell. Each move
is one of the eight compass headings. Connected sensors (touching sensing
disks) plan jointly; disconnected ones follow the last shared plan or fall
back to a solo policy that drifts to the centre.

Detection uses a Poisson intrusion model: the chance that an intruder at
distance d slips past a sensor of radius R is 1 - exp(-lam * (d - R) * 2R).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

# (d_row, d_col) for headings k*pi/4, k = 0..7; rows grow along +y, cols along +x
HEADINGS = tuple((int(round(math.sin(k * math.pi / 4))), int(round(math.cos(k * math.pi / 4))))
                 for k in range(8))
DEFAULT_WEIGHTS = (0.5, 0.05, 0.05, 0.8)
# lam * R^2 at which the diagonal/orthogonal first-detection ratio is exactly 5
LAMBDA_R2_FIVE = math.log(5.0) / (4.0 * (math.sqrt(2.0) - 1.0))


# ---------------------------------------------------------------------------
# Kinematics and geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensorAgent:
    x: float
    y: float
    theta: float
    v_min: float = 0.0
    v_max: float = 1.0
    radius: float = 1.0

    @property
    def pos(self):
        return np.array([self.x, self.y])


def wrap_heading(theta):
    """Map an angle into (0, 2*pi]."""
    t = math.fmod(theta, 2 * math.pi)
    if t <= 0:
        t += 2 * math.pi
    return t


def unicycle_step(agent: SensorAgent, v, omega, dt) -> SensorAgent:
    """Forward-Euler unicycle update."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if not (agent.v_min <= v <= agent.v_max):
        raise ConfigError(f"speed {v} outside [{agent.v_min}, {agent.v_max}]")
    return replace(agent,
                   x=agent.x + v * dt * math.cos(agent.theta),
                   y=agent.y + v * dt * math.sin(agent.theta),
                   theta=wrap_heading(agent.theta + omega * dt))


@dataclass(frozen=True)
class Corridor:
    """Square of 3x3 cells with side sqrt(2)*R, optionally extended by factor k."""
    radius: float = 1.0
    k: float = 0.0
    n: int = 3

    def __post_init__(self):
        if self.radius <= 0 or self.k < 0:
            raise ConfigError("need radius > 0 and k >= 0")

    @property
    def cell_side(self):
        return math.sqrt(2.0) * self.radius

    @property
    def side(self):
        return self.n * self.cell_side

    @property
    def square_area(self):
        return self.side ** 2

    @property
    def area(self):
        return self.square_area if self.k == 0 else 2 * self.k * self.square_area

    @property
    def cells(self):
        return [(r, c) for r in range(self.n) for c in range(self.n)]

    @property
    def centre_cell(self):
        return (self.n // 2, self.n // 2)

    def inside(self, cell):
        return 0 <= cell[0] < self.n and 0 <= cell[1] < self.n

    def center(self, cell):
        r, c = cell
        return np.array([(c + 0.5) * self.cell_side, (r + 0.5) * self.cell_side])

    def cell_of(self, p):
        c = min(int(p[0] // self.cell_side), self.n - 1)
        r = min(int(p[1] // self.cell_side), self.n - 1)
        return (r, c)


def cell_step(a, b):
    """Chebyshev distance between cells (number of 8-connected moves)."""
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


# ---------------------------------------------------------------------------
# Detection model
# ---------------------------------------------------------------------------

def p_no_intrusion(agent_pos, target_pos, radius, lam):
    d = float(np.hypot(*(np.asarray(target_pos, float) - np.asarray(agent_pos, float))))
    if d < radius:
        return 1.0
    return math.exp(-lam * (d - radius) * 2 * radius)


def p_intrusion(agent_pos, target_pos, radius, lam):
    """(probability an intruder at target slips past, detected flag).

    Inside the sensing disk the target is already detected: (0.0, True).
    """
    d = float(np.hypot(*(np.asarray(target_pos, float) - np.asarray(agent_pos, float))))
    if d < radius:
        return 0.0, True
    return 1.0 - math.exp(-lam * (d - radius) * 2 * radius), False


def p_first_detection(rel_pos, radius, lam):
    d = math.hypot(rel_pos[0], rel_pos[1])
    if d < radius:
        raise ConfigError("target already inside the sensing disk")
    return math.exp(-lam * (d - radius) * 2 * radius)


# distance from the least covered entry point to the nearest sensor, per formation
FORMATION_ENTRY_DISTANCE = {
    "diagonal": 3.0,
    "orthogonal": 1.0 + 2.0 * math.sqrt(2.0),
}


def formation_first_detection(kind, radius, lam):
    """First-detection probability at the weakest entry point of a formation."""
    return p_first_detection((FORMATION_ENTRY_DISTANCE[kind] * radius, 0.0), radius, lam)


def formation_ratio(radius, lam):
    """Diagonal over orthogonal first-detection probability."""
    return (formation_first_detection("diagonal", radius, lam)
            / formation_first_detection("orthogonal", radius, lam))


def formation_align(n_agents, corridor: Corridor, kind="diagonal"):
    """Target positions for a connected team: along the diagonal, or a line
    perpendicular to the entry edges through the corridor centre."""
    if n_agents < 1:
        raise ConfigError("need at least one agent")
    mid = np.array([corridor.side / 2, corridor.side / 2])
    step = corridor.cell_side
    offs = (np.arange(n_agents) - (n_agents - 1) / 2.0) * step
    if kind == "diagonal":
        return mid + np.c_[offs, offs]
    if kind == "orthogonal":
        return mid + np.c_[np.zeros(n_agents), offs]
    raise ConfigError(f"unknown formation {kind!r}")


# ---------------------------------------------------------------------------
# Conditions, payoff and selection
# ---------------------------------------------------------------------------

def payoff(mu, weights=DEFAULT_WEIGHTS, form="product"):
    """Gate term times the weighted sum of the remaining conditions.

    ``form="sum"`` gives the plain weighted sum of all four instead.
    """
    m = [1.0 if v else 0.0 for v in mu]
    w = weights
    if form == "product":
        return m[0] * w[0] * sum(m[j] * w[j] for j in range(1, 4))
    if form == "sum":
        return sum(m[j] * w[j] for j in range(4))
    raise ConfigError(f"unknown payoff form {form!r}")


def cell_exposure(cell, others, corridor, lam):
    """Intrusion probability at a cell centre given the other agents' cells."""
    if not others:
        return 1.0
    c = corridor.center(cell)
    return min(p_intrusion(corridor.center(o), c, corridor.radius, lam)[0] for o in others)


def condition_eval(cell, claimed, scanned, others, corridor, lam, progress):
    """Four conditions for moving into ``cell``.

    claimed: cells other agents will occupy next (shared or predicted);
    scanned: cells already scanned this period (own plus exchanged);
    others: current cells of the other agents as last known;
    progress: whether the move keeps the agent's remaining work achievable.
    """
    no_conflict = corridor.inside(cell) and cell not in claimed
    fresh = cell not in scanned
    p = cell_exposure(cell, others, corridor, lam)
    exposed = p > 1.0 - p
    return (bool(no_conflict), bool(fresh), bool(exposed), bool(progress))


def _heading_change(prev, move):
    if prev is None:
        return 0.0
    a = math.atan2(*prev)
    b = math.atan2(*move)
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def nash_select(candidates, payoffs, p_intr, prev_move=None):
    """Index of the best candidate move.

    Ties go to the cell with the highest intrusion probability, then to the
    smallest heading change, then to the lowest index. Returns ``None`` when
    every payoff is zero so the caller can fall back to the solo policy.
    """
    if not candidates:
        raise ConfigError("no admissible strategy")
    pay = np.asarray(payoffs, float)
    if not (pay > 0).any():
        return None
    best = None
    for j, mv in enumerate(candidates):
        key = (pay[j], p_intr[j], -_heading_change(prev_move, mv), -j)
        if best is None or key > best[0]:
            best = (key, j)
    return best[1]


# ---------------------------------------------------------------------------
# Agents and planning
# ---------------------------------------------------------------------------

@dataclass
class Memory:
    """What one agent knows: its own state plus the last meeting exchange."""
    cell: tuple
    scanned: dict = field(default_factory=dict)   # cell -> step of last scan
    known: dict = field(default_factory=dict)     # agent id -> (cell, step seen)
    plan: list = field(default_factory=list)      # joint configs for coming steps
    plan_ids: tuple = ()
    prev_move: tuple = None
    period_start: int = 0


def scanned_this_period(mem: Memory):
    return {c for c, t in mem.scanned.items() if t >= mem.period_start}


def tour_history(start, plan, n_steps):
    """Unroll a cyclic joint plan: agents keep swapping roles each period."""
    start = tuple(start)
    pos = list(start)
    out = [tuple(pos)]
    while len(out) < n_steps + 1:
        role = [start.index(c) for c in pos]
        for cfg in plan:
            pos = [cfg[r] for r in role]
            out.append(tuple(pos))
    return out[:n_steps + 1]


def anticipated_detection(start, plan, corridor, speed_cells=math.sqrt(2.0), phases=24):
    """Fraction of spawn phases at which the patrol catches a least-risk intruder."""
    if set(plan[-1]) != set(start):
        return 0.0
    period = len(plan)
    t_cross = corridor.n / speed_cells
    hist = tour_history(start, plan, int(math.ceil(period + t_cross)) + 2)
    hits = 0
    for j in range(phases):
        t0 = period * (j + 0.5) / phases
        hits += _intrusion_detected(corridor, hist, range(len(start)), t0, speed_cells)[0]
    return hits / phases


def _plan_key(start, corridor, lam, weights, form, scanned, horizon, max_nodes, speed_cells):
    return (tuple(start), corridor, lam, tuple(weights), form, frozenset(scanned), horizon,
            max_nodes, speed_cells)


_PLAN_CACHE = {}


def plan_period(cells, corridor, lam, weights=DEFAULT_WEIGHTS, form="product",
                scanned=frozenset(), horizon=None, max_nodes=20_000,
                speed_cells=math.sqrt(2.0)):
    """Joint cooperative search for the rest of a monitoring period.

    Every agent moves one 8-connected cell per step without collisions; the
    plan must scan every remaining cell and end on the starting set of cells
    so the patrol can repeat. Plans are ranked by summed payoff, then by how
    often the repeated patrol would catch an intruder that enters at the
    least covered point (anticipated at ``speed_cells`` cells per step).
    Returns the joint configurations after each step, or ``None`` when no
    plan turns up within ``max_nodes`` joint moves.
    """
    key = _plan_key(cells, corridor, lam, weights, form, scanned, horizon, max_nodes,
                    speed_cells)
    if key in _PLAN_CACHE:
        hit = _PLAN_CACHE[key]
        return list(hit) if hit is not None else None
    start = tuple(cells)
    n_cells = len(corridor.cells)
    todo = set(corridor.cells) - set(scanned) - set(start)
    if horizon is None:
        horizon = max(1, math.ceil(n_cells / len(start)))
    found = []
    budget = [max_nodes]

    def moves(c):
        return [(c[0] + dr, c[1] + dc) for dr, dc in HEADINGS
                if corridor.inside((c[0] + dr, c[1] + dc))]

    def rec(cur, left, depth, path, score):
        remaining = horizon - depth
        if remaining == 0:
            if not left and set(cur) == set(start):
                found.append((score, list(path)))
            return
        # the last step must land back on the starting set
        if len(left) > (remaining - 1) * len(cur):
            return
        done = set(corridor.cells) - left
        for combo in itertools.product(*(moves(c) for c in cur)):
            budget[0] -= 1
            if budget[0] < 0:
                return
            if len(set(combo)) < len(combo):
                continue
            if remaining == 1 and set(combo) != set(start):
                continue
            sc = 0.0
            for i, cell in enumerate(combo):
                others = [cur[j] for j in range(len(cur)) if j != i]
                mu = condition_eval(cell, set(combo[:i] + combo[i + 1:]), done, others,
                                    corridor, lam, True)
                sc += payoff(mu, weights, form)
            rec(combo, left - set(combo), depth + 1, path + [combo], score + sc)

    rec(start, frozenset(todo), 0, [], 0.0)
    best = None
    if found:
        top = max(sc for sc, _ in found)
        ranked = [(anticipated_detection(start, pl, corridor, speed_cells), -j, pl)
                  for j, (sc, pl) in enumerate(found) if sc >= top - 1e-12]
        best = max(ranked)[2]
    _PLAN_CACHE[key] = best
    return list(best) if best is not None else None


def degraded_mode(mem: Memory, corridor: Corridor, lam, in_contact, claimed=(),
                  others=(), weights=DEFAULT_WEIGHTS, form="product"):
    """Solo policy for an agent without a shared plan.

    Out of contact and away from the centre cell it heads to the centre.
    With contact, or while the centre cell is under its own disk, it picks
    the best single move by payoff.
    """
    centre = corridor.centre_cell
    if not in_contact and mem.cell != centre:
        dr = int(np.sign(centre[0] - mem.cell[0]))
        dc = int(np.sign(centre[1] - mem.cell[1]))
        return (mem.cell[0] + dr, mem.cell[1] + dc)
    return individual_choice(mem, corridor, lam, claimed, others, weights, form)


def individual_choice(mem, corridor, lam, claimed=(), others=(), weights=DEFAULT_WEIGHTS,
                      form="product"):
    """Non-cooperative best response over the eight headings."""
    done = scanned_this_period(mem)
    left = [c for c in corridor.cells if c not in done and c not in claimed]
    cands, pays, pint = [], [], []
    here = mem.cell
    gap_now = min((cell_step(here, c) for c in left), default=0)
    for mv in HEADINGS:
        cell = (here[0] + mv[0], here[1] + mv[1])
        if not corridor.inside(cell):
            continue
        gap = min((cell_step(cell, c) for c in left), default=0)
        progress = gap < gap_now or cell in left
        mu = condition_eval(cell, set(claimed), done, list(others), corridor, lam, progress)
        cands.append(mv)
        pays.append(payoff(mu, weights, form))
        pint.append(cell_exposure(cell, list(others), corridor, lam))
    j = nash_select(cands, pays, pint, mem.prev_move)
    if j is None:
        # nothing worth doing: drift toward the centre, or take the first legal move
        centre = corridor.centre_cell
        if here != centre:
            return (here[0] + int(np.sign(centre[0] - here[0])),
                    here[1] + int(np.sign(centre[1] - here[1])))
        j = 0
    mv = cands[j]
    return (here[0] + mv[0], here[1] + mv[1])


# ---------------------------------------------------------------------------
# Team engine
# ---------------------------------------------------------------------------

def sweep_schedule(n_agents, corridor: Corridor):
    """Lawnmower: a column of agents sweeps across and back (period 2*(n-1))."""
    cols = list(range(corridor.n)) + list(range(corridor.n - 2, 0, -1))
    rows = [int(round(r)) for r in np.linspace(0, corridor.n - 1, n_agents)]
    return [tuple((r, c) for r in rows) for c in cols]


class CoverageTeam:
    """Cell-hopping team. ``mode`` is 'igd' or 'sweep'.

    Agents listed in ``absent`` have left the region and take no part.
    Each agent decides from its own :class:`Memory`; memories only mix at
    meetings (touching sensing disks).
    """

    def __init__(self, corridor=None, n_agents=3, mode="igd", lam=None,
                 weights=DEFAULT_WEIGHTS, form="product", absent=(), start=None):
        self.corridor = corridor or Corridor()
        if mode not in ("igd", "sweep"):
            raise ConfigError(f"unknown coverage mode {mode!r}")
        self.mode = mode
        self.lam = lam if lam is not None else LAMBDA_R2_FIVE / self.corridor.radius ** 2
        self.weights = weights
        self.form = form
        self.t = 0
        if mode == "sweep":
            self.schedule = sweep_schedule(n_agents, self.corridor)
            cells = list(self.schedule[0])
        elif start is not None:
            cells = [tuple(c) for c in start]
        else:
            cells = [self.corridor.cell_of(p)
                     for p in formation_align(n_agents, self.corridor, "diagonal")]
        self.cells = cells
        self.present = [i not in set(absent) for i in range(n_agents)]
        self.mem = [Memory(cell=c, scanned={c: 0}) for c in cells]
        self.history = [tuple(cells)]

    @property
    def ids(self):
        return [i for i, p in enumerate(self.present) if p]

    def remove(self, i):
        self.present[i] = False

    def touching(self, i, j):
        d = np.hypot(*(self.corridor.center(self.cells[i]) - self.corridor.center(self.cells[j])))
        return d <= 2 * self.corridor.radius * (1 + 1e-9)

    def groups(self):
        """Connected components of the present agents (sorted id tuples)."""
        ids = self.ids
        seen, out = set(), []
        for i in ids:
            if i in seen:
                continue
            comp, stack = [], [i]
            seen.add(i)
            while stack:
                a = stack.pop()
                comp.append(a)
                for b in ids:
                    if b not in seen and self.touching(a, b):
                        seen.add(b)
                        stack.append(b)
            out.append(tuple(sorted(comp)))
        return out

    def meet(self, group):
        """Exchange scan records and, if needed, agree on a joint plan."""
        if len(group) < 2:
            return
        merged = {}
        for i in group:
            for c, t in self.mem[i].scanned.items():
                merged[c] = max(t, merged.get(c, t))
        for i in group:
            m = self.mem[i]
            m.scanned = dict(merged)
            for j in group:
                m.known[j] = (self.cells[j], self.t)
        lead = self.mem[group[0]]
        shared = all(self.mem[i].plan == lead.plan and self.mem[i].plan_ids == lead.plan_ids
                     for i in group)
        if lead.plan and shared and set(group) <= set(lead.plan_ids):
            return          # current joint decision still stands
        plan = plan_period([self.cells[i] for i in group], self.corridor, self.lam,
                           self.weights, self.form)
        for i in group:
            m = self.mem[i]
            m.plan = list(plan) if plan else []
            m.plan_ids = group if plan else ()
            m.period_start = self.t

    def decide(self, i, group):
        """Next cell for agent ``i`` from its own memory only."""
        m = self.mem[i]
        if m.plan and i in m.plan_ids:
            return m.plan[0][m.plan_ids.index(i)]
        in_contact = len(group) > 1
        others = [m.known[j][0] for j in m.known if j != i]
        # teammates in contact announce their next cell; predictions cover the rest
        claimed = set()
        return degraded_mode(m, self.corridor, self.lam, in_contact, claimed, others,
                             self.weights, self.form)

    def step(self):
        if self.mode == "sweep":
            nxt = list(self.schedule[(self.t + 1) % len(self.schedule)])
            for i in self.ids:
                self.cells[i] = nxt[i]
        else:
            groups = self.groups()
            for g in groups:
                self.meet(g)
            nxt = list(self.cells)
            taken = set()
            for g in groups:
                for i in g:
                    cell = self.decide(i, g)
                    if cell in taken:
                        # collision with a teammate already moving there: stay put
                        cell = self.cells[i]
                    taken.add(cell)
                    nxt[i] = cell
            for i in self.ids:
                m = self.mem[i]
                mv = (nxt[i][0] - self.cells[i][0], nxt[i][1] - self.cells[i][1])
                m.prev_move = mv if mv != (0, 0) else m.prev_move
                if m.plan and i in m.plan_ids:
                    m.plan.pop(0)
                    if not m.plan:
                        m.plan_ids = ()
            self.cells = nxt
        self.t += 1
        for i in self.ids:
            m = self.mem[i]
            m.cell = self.cells[i]
            m.scanned[m.cell] = self.t
            if set(self.corridor.cells) <= scanned_this_period(m) and not m.plan:
                m.period_start = self.t
        self.history.append(tuple(self.cells))

    def run(self, steps):
        for _ in range(steps):
            self.step()
        return self.history


def coverage_period(mode="igd", n_agents=3, corridor=None, max_steps=50):
    """Steps until every cell is scanned and the team is back on its start cells."""
    team = CoverageTeam(corridor, n_agents, mode)
    start = set(team.cells)
    seen = set(team.cells)
    for t in range(1, max_steps + 1):
        team.step()
        seen |= set(team.cells)
        if seen == set(team.corridor.cells) and set(team.cells) == start:
            return t
    return None


# ---------------------------------------------------------------------------
# Intrusion trials
# ---------------------------------------------------------------------------

def _positions(corridor, history, t):
    """Agent positions at continuous time ``t`` (in T_steps), linear between cells."""
    k = int(math.floor(t))
    f = t - k
    a = np.array([corridor.center(c) for c in history[k]])
    b = np.array([corridor.center(c) for c in history[min(k + 1, len(history) - 1)]])
    return a + (b - a) * f, (b - a)


def _closest_approach(r0, dv, t_len):
    """Minimum of |r0 + dv*t| for t in [0, t_len]."""
    vv = float(dv @ dv)
    t = 0.0 if vv == 0 else min(max(-float(r0 @ dv) / vv, 0.0), t_len)
    return float(np.hypot(*(r0 + dv * t)))


def choose_entry(corridor, pos, vel, speed, n_points=121):
    """Entry on the two open edges that stays farthest from the extrapolated team.

    Returns (entry point, velocity) for a straight crossing at ``speed``
    (distance per T_step).
    """
    side = corridor.side
    t_cross = side / speed
    best = None
    for y0, sgn in ((0.0, 1.0), (side, -1.0)):
        v = np.array([0.0, sgn * speed])
        for x in np.linspace(0.0, side, n_points):
            p = np.array([x, y0])
            d = min(_closest_approach(pos[i] - p, vel[i] - v, t_cross) for i in range(len(pos)))
            if best is None or d > best[0]:
                best = (d, p, v)
    return best[1], best[2]


def _intrusion_detected(corridor, history, live, t_spawn, speed_cells):
    """Spawn a least-risk intruder at ``t_spawn`` and check it against the patrol.

    Returns (detected, steps elapsed).
    """
    speed = speed_cells * corridor.cell_side
    t_cross = corridor.side / speed
    live = list(live)
    pos, vel = _positions(corridor, history, t_spawn)
    entry, v = choose_entry(corridor, pos[live], vel[live], speed)
    # exact check over the piecewise-linear motion
    edges = [t_spawn] + list(range(int(math.floor(t_spawn)) + 1,
                                   int(math.ceil(t_spawn + t_cross)))) + [t_spawn + t_cross]
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        pa, va = _positions(corridor, history, a)
        q = entry + v * (a - t_spawn)
        for i in live:
            if _closest_approach(pa[i] - q, va[i] - v, b - a) <= corridor.radius:
                return True, int(math.ceil(b - t_spawn))
    return False, int(math.ceil(t_cross))


def run_coverage_trial(mode="igd", seed=0, corridor=None, n_agents=3,
                       speed_cells=math.sqrt(2.0), absent=(), horizon=12):
    """One seeded intrusion attempt against a patrolling team.

    The intruder appears at a random time, reads the team's positions and
    headings, picks the entry point it expects to stay clear of, and crosses
    the corridor in a straight line at ``speed_cells`` cells per step (the
    default matches a sensor's diagonal hop). Returns (detected, steps).
    """
    corridor = corridor or Corridor()
    rng = np.random.default_rng(seed)
    t_spawn = float(rng.uniform(0.0, horizon))
    t_cross = corridor.n / speed_cells
    team = CoverageTeam(corridor, n_agents, mode, absent=absent)
    history = team.run(int(math.ceil(t_spawn + t_cross)) + 2)
    return _intrusion_detected(corridor, history, team.ids, t_spawn, speed_cells)
