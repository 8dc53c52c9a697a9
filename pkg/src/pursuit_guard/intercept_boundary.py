"""k-interceptor boundary defence.

Robots live on an open boundary curve and are described by their arc
coordinates. Each robot is responsible for the boundary points where it is
the k-th closest robot; it moves toward whichever side has the larger
danger value (boundary distance left to cover minus the intruder's time
advantage). The single-interceptor law is the case ``k = 1``.

Robot indices are zero-based throughout.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .geometry import ParamCurve, Point2, arc_coord, as_xy

log = logging.getLogger(__name__)

NEG_INF = -math.inf
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class BoundaryTeam:
    curve: ParamCurve
    coords: np.ndarray
    v_r_max: float
    k: int = 1
    epsilon: float = 1.0

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        n = len(self.coords)
        if self.v_r_max <= 0 or self.epsilon <= 0:
            raise ConfigError("v_r_max and epsilon must be positive")
        if self.k > n:
            raise ConfigError(f"k={self.k} exceeds team size {n}")
        if not 1 <= self.k or (self.k > 1 and 2 * self.k > n):
            raise ConfigError(f"need 1 <= k <= n/2, got k={self.k}, n={n}")
        L = self.curve.length
        if np.any(np.diff(self.coords) < 0):
            raise ConfigError("robot coordinates must be sorted")
        if self.coords[0] < 0 or self.coords[-1] > L * (1 + 1e-12):
            raise ConfigError("robot coordinates must lie in [0, L]")

    @property
    def n(self):
        return len(self.coords)

    @property
    def length(self):
        return self.curve.length

    def with_coords(self, coords):
        return BoundaryTeam(self.curve, coords, self.v_r_max, self.k, self.epsilon)


@dataclass
class IntruderState:
    pos: tuple
    v_i_max: float
    visible_since: float = 0.0

    def __post_init__(self):
        self.pos = tuple(map(float, as_xy(self.pos)))
        if self.v_i_max <= 0:
            raise ConfigError("v_i_max must be positive")


class DangerPair(NamedTuple):
    m_minus: float
    m_plus: float


class Segments(NamedTuple):
    """Arc intervals a robot answers for; ``None`` marks an empty side."""
    minus: tuple | None
    plus: tuple | None
    edge: bool


def speed_ratio(team, intruder):
    return team.v_r_max / intruder.v_i_max


# ---------------------------------------------------------------------------
# Distances and segments
# ---------------------------------------------------------------------------

def kth_distances(coords, s, k):
    """k-th smallest |c_i - s| for each entry of ``s`` (vectorized)."""
    coords = np.asarray(coords, dtype=float)
    if k > len(coords):
        raise ConfigError(f"k={k} exceeds team size {len(coords)}")
    d = np.abs(np.asarray(s, dtype=float)[..., None] - coords)
    return np.partition(d, k - 1, axis=-1)[..., k - 1]


def kth_arc_distance(team: BoundaryTeam, P) -> float:
    """Arc distance from the on-curve point ``P`` to its k-th closest robot."""
    s = arc_coord(team.curve, P)
    return float(kth_distances(team.coords, s, team.k))


def responsibility_segments(team: BoundaryTeam, i: int) -> Segments:
    """Minus/plus arc intervals of robot ``i``.

    On the minus interval robot ``i`` is the k-th closest robot and lies to
    the right; on the plus interval it lies to the left. Edge robots (the
    first and last ``k - 1``) get a single-sided or trimmed share so that
    the union over all robots still tiles ``[0, L]``.
    """
    c, n, k, L = team.coords, team.n, team.k, team.length
    if not 0 <= i < n:
        raise IndexError(i)
    minus = plus = None
    if i - k + 1 >= 0:
        lo = 0.0 if i - k < 0 else 0.5 * (c[i - k] + c[i])
        minus = (lo, 0.5 * (c[i - k + 1] + c[i]))
    if i + k - 1 <= n - 1:
        hi = L if i + k > n - 1 else 0.5 * (c[i] + c[i + k])
        plus = (0.5 * (c[i] + c[i + k - 1]), hi)
    edge = i < k - 1 or i > n - k
    return Segments(minus, plus, edge)


# ---------------------------------------------------------------------------
# Danger functional
# ---------------------------------------------------------------------------

def danger_values(team: BoundaryTeam, intruder: IntruderState, s) -> np.ndarray:
    """beta_k(s) - |x_I - F(s)| * V_R / V_I at arc coordinates ``s``."""
    s = np.asarray(s, dtype=float)
    beta = kth_distances(team.coords, s, team.k)
    pts = team.curve.points_at(s)
    alpha = np.hypot(pts[..., 0] - intruder.pos[0], pts[..., 1] - intruder.pos[1])
    return beta - alpha * speed_ratio(team, intruder)


def _golden_max(f, a, b, tol):
    """Golden-section search for a maximum of a unimodal ``f`` on [a, b]."""
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _sampled_argmax(team, intruder, a, b, n_samples=512, refine=True):
    """(value, s) of the sampled supremum on [a, b]; ties go to smaller s."""
    if b - a <= 0:
        return float(danger_values(team, intruder, a)), a
    s = np.linspace(a, b, n_samples)
    v = danger_values(team, intruder, s)
    j = int(np.argmax(v))
    best_v, best_s = float(v[j]), float(s[j])
    if refine:
        lo, hi = s[max(j - 1, 0)], s[min(j + 1, n_samples - 1)]
        xs, fs = _golden_max(lambda x: float(danger_values(team, intruder, x)),
                             lo, hi, 1e-6 * team.length)
        if fs > best_v:
            best_v, best_s = fs, xs
    return best_v, best_s


def danger_sup(team: BoundaryTeam, intruder: IntruderState, segment,
               n_samples=512, refine=True) -> float:
    """Supremum of the danger functional over an arc interval.

    Dense sampling followed by golden-section refinement around the best
    sample. Empty segments return ``-inf``.
    """
    if segment is None:
        return NEG_INF
    a, b = segment
    if b < a:
        return NEG_INF
    return _sampled_argmax(team, intruder, a, b, n_samples, refine)[0]


def endpoint_dangers(team: BoundaryTeam, intruder: IntruderState):
    """Closed-form side dangers for the interior robots.

    Valid when the intruder is at least as fast as the robots: the danger
    functional is then monotone on each responsibility interval and peaks
    at its far end. Returns ``{i: (H_minus, H_plus, s_minus, s_plus)}``.
    """
    c, n, k, L = team.coords, team.n, team.k, team.length
    rho = speed_ratio(team, intruder)
    xi = np.asarray(intruder.pos)
    idx = range(k - 1, n - k + 1)
    s_minus = np.array([0.0 if i == k - 1 else 0.5 * (c[i] + c[i - k]) for i in idx])
    s_plus = np.array([L if i == n - k else 0.5 * (c[i] + c[i + k]) for i in idx])
    gap_minus = np.array([c[i] - s for i, s in zip(idx, s_minus)])
    gap_plus = np.array([s - c[i] for i, s in zip(idx, s_plus)])
    pm, pp = team.curve.points_at(s_minus), team.curve.points_at(s_plus)
    hm = gap_minus - np.hypot(*(pm - xi).T) * rho
    hp = gap_plus - np.hypot(*(pp - xi).T) * rho
    return {i: (float(hm[j]), float(hp[j]), float(s_minus[j]), float(s_plus[j]))
            for j, i in enumerate(idx)}


def _use_endpoints(team, intruder, method):
    if method == "auto":
        return intruder.v_i_max >= team.v_r_max
    if method == "endpoint":
        return True
    if method == "sample":
        return False
    raise ConfigError(f"unknown method {method!r}")


def danger_pair(team, intruder, i, method="auto") -> DangerPair:
    if _use_endpoints(team, intruder, method) and team.k - 1 <= i <= team.n - team.k:
        hm, hp, _, _ = endpoint_dangers(team, intruder)[i]
        return DangerPair(hm, hp)
    seg = responsibility_segments(team, i)
    return DangerPair(danger_sup(team, intruder, seg.minus),
                      danger_sup(team, intruder, seg.plus))


# ---------------------------------------------------------------------------
# Law
# ---------------------------------------------------------------------------

def control_detail(team: BoundaryTeam, intruder: IntruderState, method="auto"):
    """Velocities plus a mask of robots whose side dangers tie."""
    n, k, V = team.n, team.k, team.v_r_max
    u = np.zeros(n)
    ties = np.zeros(n, dtype=bool)
    tol = 1e-9 * team.length
    fast = _use_endpoints(team, intruder, method)
    h = endpoint_dangers(team, intruder) if fast else None
    for i in range(n):
        if i < k - 1:
            u[i] = V
        elif i > n - k:
            u[i] = -V
        else:
            if fast:
                mm, mp = h[i][0], h[i][1]
            else:
                mm, mp = danger_pair(team, intruder, i, method="sample")
            if abs(mm - mp) <= tol:
                ties[i] = True
            elif mm < mp:
                u[i] = V
            else:
                u[i] = -V
    return u, ties


def control_law(team: BoundaryTeam, intruder: IntruderState, method="auto") -> np.ndarray:
    """Bang/zero velocity command for every robot."""
    return control_detail(team, intruder, method)[0]


def integrate_coords(coords, u, dt, length, k=1):
    """Euler step along the boundary that never lets robots pass each other.

    Edge robots (the first and last ``k - 1``) only escort their interior
    neighbour, so they yield: one that would overtake is held in contact at
    the neighbour's position. Other robots that would cross are pooled
    at the mean of their block (the midpoint for a pair). Returns
    ``(new_coords, clamp_events)``.
    """
    c = np.clip(np.asarray(coords, dtype=float) + np.asarray(u) * dt, 0.0, length)
    n = len(c)
    events = []
    for j in range(k - 2, -1, -1):
        if c[j] > c[j + 1]:
            c[j] = c[j + 1]
            events.append((int(j), int(j + 1), float(c[j])))
    for j in range(n - k + 1, n):
        if c[j] < c[j - 1]:
            c[j] = c[j - 1]
            events.append((int(j - 1), int(j), float(c[j])))
    if np.any(c[:-1] > c[1:]):
        # pool adjacent violators: robots that collide move on at their mean
        blocks = []
        for j, x in enumerate(c):
            blocks.append([x, 1, j])
            while len(blocks) > 1 and blocks[-2][0] / blocks[-2][1] > blocks[-1][0] / blocks[-1][1]:
                tot, cnt, _ = blocks.pop()
                blocks[-1][0] += tot
                blocks[-1][1] += cnt
        for tot, cnt, j0 in blocks:
            if cnt > 1 and np.any(np.diff(c[j0:j0 + cnt]) < 0):
                m = tot / cnt
                c[j0:j0 + cnt] = m
                events += [(int(j), int(j + 1), float(m)) for j in range(j0, j0 + cnt - 1)]
    return c, events


# ---------------------------------------------------------------------------
# Feasibility and adversary
# ---------------------------------------------------------------------------

class Feasibility(NamedTuple):
    feasible: bool
    margin: float


def _global_argmax(team, intruder, method="auto"):
    """(value, s) of the supremum over the whole boundary."""
    tol = 1e-9 * team.length
    cands = []
    if _use_endpoints(team, intruder, method):
        for hm, hp, sm, sp in endpoint_dangers(team, intruder).values():
            cands += [(hm, sm), (hp, sp)]
    else:
        for i in range(team.n):
            seg = responsibility_segments(team, i)
            for part in (seg.minus, seg.plus):
                if part is not None:
                    cands.append(_sampled_argmax(team, intruder, part[0], part[1]))
    best = max(v for v, _ in cands)
    s = min(s for v, s in cands if v >= best - tol)
    return best, s


def feasibility(team: BoundaryTeam, intruder: IntruderState, method="auto") -> Feasibility:
    """Margin = sup of the danger functional; feasible iff margin <= epsilon."""
    margin = _global_argmax(team, intruder, method)[0]
    return Feasibility(bool(margin <= team.epsilon), float(margin))


def lyapunov_w(team: BoundaryTeam, intruder: IntruderState, method="auto") -> float:
    return _global_argmax(team, intruder, method)[0]


def sampled_margin(team, intruder, n_samples=512):
    """Margin from sampling only, ignoring the closed form."""
    return _global_argmax(team, intruder, method="sample")[0]


def worst_case_target_coord(team, intruder, method="auto") -> float:
    return _global_argmax(team, intruder, method)[1]


def worst_case_intruder_target(team: BoundaryTeam, intruder: IntruderState,
                               method="auto") -> Point2:
    """Boundary point attaining the danger supremum (smaller coordinate on ties)."""
    s = worst_case_target_coord(team, intruder, method)
    return Point2(*team.curve.points_at(s))


def intercept_check(team: BoundaryTeam, crossing_point=None, s=None):
    """True iff at least k robots are within arc distance epsilon of the crossing."""
    if s is None:
        s = arc_coord(team.curve, crossing_point)
    d = np.abs(team.coords - s)
    witnesses = [int(j) for j in np.nonzero(d <= team.epsilon * (1 + 1e-12))[0]]
    return len(witnesses) >= team.k, witnesses
