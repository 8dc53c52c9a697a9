"""Command-line front end.

    pursuit-guard check     --scenario FILE
    pursuit-guard run       --scenario FILE [--seed N] [--out trace.jsonl]
    pursuit-guard sweep     --scenario FILE [--seeds N] [--out summary.csv]
    pursuit-guard plot-data trace.jsonl --kind KIND [--out data.csv]

Exit codes: 0 success / feasible, 2 infeasible (check only) or usage error,
1 error (schema, I/O, invariant fault).
``--mode-override`` swaps the mode-specific variant: the intruder strategy
(boundary, siege), ``igd``/``sweep`` (coverage) or the law (switching).
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys

import numpy as np

from . import force_field as ff
from . import game_coverage as gc
from . import intercept_boundary as ib
from . import siege as sg
from . import switching_nav as sn
from .errors import ConfigError, PursuitGuardError, SchemaError
from .scenario import (build_boundary_curve, build_obstacle, build_region, load_scenario)
from .sim_engine import (BoundaryWorld, SiegeWorld, SimTrace, intruder_strategy, run_batch,
                         scenario_hash)

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
PLOT_KINDS = ("trajectories", "y-coordinate", "distances", "clearance")


# ---------------------------------------------------------------------------
# Scenario -> world
# ---------------------------------------------------------------------------

def _override(sc, value):
    if value is None:
        return sc
    sc = dict(sc)
    mode = sc["mode"]
    if mode == "boundary":
        sc["intruder"] = {**sc["intruder"], "strategy": value}
    elif mode == "siege":
        sc["intruders"] = {**sc["intruders"], "strategy": value}
    elif mode == "coverage":
        sc["team"] = {**sc["team"], "strategy": value}
    elif mode == "switching":
        sc["params"] = {**sc["params"], "law": value}
    else:
        raise ConfigError(f"--mode-override has no meaning for mode {mode}")
    return sc


def _strategy(spec):
    name = spec.get("strategy", "worst_case")
    if name == "waypoints":
        return lambda: intruder_strategy("waypoints", points=spec["waypoints_m"])
    return lambda: intruder_strategy(name)


def boundary_world(sc, seed):
    curve, region = build_boundary_curve(sc["boundary"])
    region = build_region(sc, curve, region)
    t, it, p = sc["team"], sc["intruder"], sc.get("params", {})
    return BoundaryWorld(curve, region, t["coords_m"], t["v_max_mps"], it["v_max_mps"],
                         it["position_m"], k=int(t.get("k", 1)), epsilon=t["epsilon_m"],
                         dt=p.get("dt_s"), strategy=_strategy(it)(), seed=seed)


def siege_ring(sc):
    r = sc["ring"]
    b1, b2 = r["split_rad"]
    return sg.SiegeRing.circle(r["center_m"], r["radius_m"], b1, b2)


def siege_world(sc, seed):
    t, it, p = sc["team"], sc["intruders"], sc.get("params", {})
    return SiegeWorld(siege_ring(sc), t["coords1_m"], t["coords2_m"], t["v_max_mps"],
                      it["v_max_mps"], it["positions_m"], epsilon=t["epsilon_m"],
                      dt=p.get("dt_s"), eta_mode=it.get("eta_mode", "normalized"),
                      strategy=_strategy(it), seed=seed)


def switching_params(sc):
    p = sc["params"]
    return sn.SwitchingParams(p["epsilon_m"], p["mu0_m"], p["sensing_radius_m"],
                              robot_radius=p.get("robot_radius_m", 0.0),
                              kappa=p.get("kappa", 1.5), noise=p.get("noise_m", 0.0),
                              law=p.get("law", "single"))


def force_world(sc, seed):
    p = sc["params"]
    if sc.get("layout") == "reference":
        return ff.reference_layout_world(seed=seed, epsilon=p["epsilon_m"], dt=p.get("dt_s", 0.01),
                                   v_max=sc.get("robot", {}).get("v_max_mps", 1.0))
    params = ff.ForceParams(epsilon=p["epsilon_m"], dt=p.get("dt_s", 0.01),
                            n_sink=int(p.get("n_sink", 8)),
                            sensing_radius=p.get("sensing_radius_m", 5.0),
                            robot_radius=p.get("robot_radius_m", 0.1),
                            v_max=sc["robot"].get("v_max_mps", 1.0))
    obs = [build_obstacle(o) for o in sc["obstacles"]]
    arena = tuple(sc.get("arena", {}).get("box_m", (-10.0, -10.0, 10.0, 10.0)))
    return ff.FieldWorld(sc["robot"]["start_m"], obs, params, arena=arena,
                         turn_sigma=p.get("turn_sigma", 0.0), seed=seed)


# ---------------------------------------------------------------------------
# Runs -> traces
# ---------------------------------------------------------------------------

def _header(sc, seed):
    return {"mode": sc["mode"], "seed": int(seed), "scenario_hash": scenario_hash(sc),
            "scenario": sc}


def _boundary_positions(tr, curve):
    for r in tr.steps():
        pts = curve.points_at(np.asarray(r["coords"], float))
        r["positions"] = {f"robot{i}": p for i, p in enumerate(np.atleast_2d(pts).tolist())}
        r["positions"]["intruder0"] = list(map(float, r["intruder"]))


def _siege_positions(tr, ring):
    for r in tr.steps():
        pos = {}
        for a, key in ((0, "coords1"), (1, "coords2")):
            pts = np.atleast_2d(ring.arcs[a].points_at(np.asarray(r[key], float)))
            for i, p in enumerate(pts.tolist()):
                pos[f"arc{a + 1}_robot{i}"] = p
        for j, q in enumerate(r["intruders"]):
            pos[f"intruder{j}"] = list(map(float, q))
        r["positions"] = pos


def run_trace(sc, seed=0):
    """(trace, summary dict) for one seeded run of any mode."""
    mode = sc["mode"]
    p = sc.get("params", {})
    max_steps = int(p.get("max_steps", 20000))
    tr = SimTrace(_header(sc, seed))
    if mode == "boundary":
        w = boundary_world(sc, seed)
        tr = w.run(max_steps, header=tr.header, record_every=int(p.get("record_every", 1)))
        _boundary_positions(tr, w.team.curve)
        c = w.crossing
        if c is not None:
            tr.add_event(c["t_cross"], "intercept" if c["intercepted"] else "escape",
                         s=c["s"], witnesses=c["witnesses"])
        outcome = "no_crossing" if c is None else ("intercepted" if c["intercepted"] else "escaped")
        summary = {"outcome": outcome, "events": len(tr.events()),
                   "t_cross": None if c is None else c["t_cross"]}
    elif mode == "siege":
        w = siege_world(sc, seed)
        tr = w.run(max_steps, header=tr.header, record_every=int(p.get("record_every", 1)))
        _siege_positions(tr, w.ring)
        cr = tr.events("crossing")
        esc = sum(1 for e in cr if not e["intercepted"])
        summary = {"outcome": "contained" if esc == 0 else "escaped", "crossings": len(cr),
                   "escapes": esc, "events": len(tr.events())}
    elif mode == "coverage":
        summary = _coverage_trace(sc, seed, tr)
    elif mode == "switching":
        summary = _switching_trace(sc, seed, tr)
    else:
        summary = _force_trace(sc, seed, tr)
    return tr, summary


def _coverage_trace(sc, seed, tr):
    cor = gc.Corridor(radius=sc["corridor"]["radius_m"], k=int(sc["corridor"].get("k", 0)))
    t = sc["team"]
    p = sc.get("params", {})
    mode = t.get("strategy", "igd")
    absent = tuple(t.get("absent", ()))
    speed = p.get("intruder_speed_cells", math.sqrt(2.0))
    horizon = p.get("horizon_steps", 12)
    rng = np.random.default_rng(seed)
    t_spawn = float(rng.uniform(0.0, horizon))
    team = gc.CoverageTeam(cor, int(t["n"]), mode, absent=absent)
    hist = team.run(int(math.ceil(t_spawn + cor.n / speed)) + 2)
    detected, steps = gc._intrusion_detected(cor, hist, team.ids, t_spawn, speed)
    for k, cells in enumerate(hist):
        tr.add_step(float(k), cells=[list(c) for c in cells],
                    positions={f"agent{i}": list(cor.center(c)) for i, c in enumerate(cells)
                               if i in team.ids})
    tr.add_event(t_spawn, "intrusion", detected=detected, steps=steps)
    return {"outcome": "detected" if detected else "missed", "events": len(tr.events()),
            "steps": steps,
            "t_spawn": t_spawn}


def _switching_trace(sc, seed, tr):
    params = switching_params(sc)
    obs = [build_obstacle(o) for o in sc["obstacles"]]
    max_steps = int(sc["params"].get("max_steps", 50))
    robots = sc["robots"]
    chain = sc.get("chain")
    runs = []
    followers = {}
    if chain:
        r0 = robots[0]
        start, goal = np.asarray(r0["start_m"], float), np.asarray(r0["goal_m"], float)
        team = sn.ChainTeam.line(start, goal - start, 1 + int(chain.get("followers", 0)),
                                 chain["spacing_m"], params.robot_radius)
        res = sn.run_chain(obs, goal, team, params, max_steps=max_steps, seed=seed)
        runs.append((0, res))
        followers = {k: poses[1:].tolist() for k, poses in enumerate(res["poses"][1:])}
    else:
        starts = [r["start_m"] for r in robots]
        goals = [r["goal_m"] for r in robots]
        for i, res in enumerate(sn.run_decentralized(obs, starts, goals, params,
                                                     max_steps=max_steps, seed=seed)):
            runs.append((i, res))
    recs = []
    for i, res in runs:
        for s in res["steps"]:
            recs.append((s.timestamp, i, s))
    recs.sort(key=lambda x: (x[0], x[1], x[2].index))
    for t, i, s in recs:
        pos = {f"robot{i}": s.end}
        for j, p in enumerate(followers.get(s.index, [])):
            pos[f"follower{j + 1}"] = p
        tr.add_step(float(t), robot=i, index=s.index, kind=s.kind, pos=s.end,
                    start=s.start, chord=s.chord, heading=s.heading, travel=s.travel,
                    retries=s.retries, min_clearance=s.min_clearance,
                    per_obstacle={str(k): v for k, v in s.per_obstacle.items()},
                    positions=pos)
        tr.add_event(float(t), "switching_point", robot=i, index=s.index, step_kind=s.kind)
    mins = [s.min_clearance for _, _, s in recs]
    done = all(res["done"] for _, res in runs)
    return {"outcome": "arrived" if done else "unfinished", "events": len(tr.events()),
            "switching_steps": max((len(res["steps"]) for _, res in runs), default=0),
            "min_clearance": min(mins) if mins else math.inf,
            "sensor_calls": sum(res["sensor_calls"] for _, res in runs)}


def _force_trace(sc, seed, tr):
    w = force_world(sc, seed)
    steps = int(sc["params"].get("steps", 500))
    every = int(sc["params"].get("record_every", 10))
    clear = []
    tr.add_step(0.0, positions={"robot": w.robot, **{f"obstacle{j}": list(o.center)
                                                     for j, o in enumerate(w.obstacles)}})
    for k in range(steps):
        _, c = w.step()
        clear.append(c)
        if (k + 1) % every == 0:
            per = {str(j): float(min(ff.obstacle_distances(o, w.robot)[0], math.inf))
                   for j, o in enumerate(w.obstacles)}
            tr.add_step(w.t, clearance=min(clear[-every:]), per_obstacle=per,
                        positions={"robot": w.robot, **{f"obstacle{j}": list(o.center)
                                                        for j, o in enumerate(w.obstacles)}})
    ok, mn, bad = ff.safety_check(clear, w.params.epsilon)
    if not ok:
        tr.add_event(bad * w.params.dt, "safety_violation", step=bad)
    return {"outcome": "safe" if ok else "violation", "events": len(tr.events()),
            "min_clearance": mn,
            "first_violation": bad}


# ---------------------------------------------------------------------------
# Feasibility check
# ---------------------------------------------------------------------------

def check(sc):
    """(feasible, report lines)."""
    mode = sc["mode"]
    if mode == "boundary":
        w = boundary_world(sc, 0)
        f = ib.feasibility(w.team, w.intruder())
        s = ib.worst_case_target_coord(w.team, w.intruder())
        pt = w.team.curve.points_at(s)
        return f.feasible, [f"margin={f.margin:.6g} epsilon={w.team.epsilon:.6g} "
                            f"attained_at_s={s:.6g} point=({pt[0]:.6g},{pt[1]:.6g})"]
    if mode == "siege":
        ring = siege_ring(sc)
        t, it = sc["team"], sc["intruders"]
        team = sg.SiegeTeam(t["coords1_m"], t["coords2_m"], t["v_max_mps"], t["epsilon_m"])
        ints = sg.IntruderSet(it["positions_m"], it["v_max_mps"],
                              it.get("eta_mode", "normalized"))
        val, arc, s = sg.ring_margin(ring, team, ints)
        pt = ring.arcs[arc].points_at(s)
        return val <= team.epsilon, [f"margin={val:.6g} epsilon={team.epsilon:.6g} "
                                     f"arc={arc + 1} s={s:.6g} point=({pt[0]:.6g},{pt[1]:.6g})"]
    if mode == "coverage":
        mode_c = sc["team"].get("strategy", "igd")
        period = gc.coverage_period(mode_c, int(sc["team"]["n"]),
                                    gc.Corridor(radius=sc["corridor"]["radius_m"]))
        return period is not None, [f"strategy={mode_c} full_coverage_period={period}"]
    if mode == "switching":
        params = switching_params(sc)
        obs = [build_obstacle(o) for o in sc["obstacles"]]
        bad = []
        for i in range(len(obs)):
            for j in range(i + 1, len(obs)):
                g = ff.pair_gap(obs[i], obs[j])
                if g > 0 and not sn.gap_admissible(g, params):
                    bad.append(f"{i}-{j}:{g:.4g}")
        lines = [f"obstacles={len(obs)} narrow_gaps={','.join(bad) or 'none'}"]
        return True, lines
    w = force_world(sc, 0)
    fast = [j for j, o in enumerate(w.obstacles) if math.hypot(*o.velocity) > w.params.v_max]
    clear = min(float(ff.obstacle_distances(o, w.robot)[0]) for o in w.obstacles)
    ok = not fast and clear >= w.params.epsilon
    return ok, [f"initial_clearance={clear:.6g} epsilon={w.params.epsilon:.6g} "
                f"too_fast={fast or 'none'}"]


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------

def plot_rows(tr: SimTrace, kind):
    """(header, rows) for one of :data:`PLOT_KINDS`."""
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown kind {kind!r}; choose from {PLOT_KINDS}")
    steps = [r for r in tr.steps() if "positions" in r or "per_obstacle" in r]
    mode = tr.header.get("mode")
    if kind == "clearance":
        if mode not in ("switching", "force_field", None):
            raise ConfigError("clearance export needs a switching or force_field trace")
        keys = sorted({k for r in steps for k in r.get("per_obstacle", {})}, key=int)
        head = ["t", "robot", "step", "min_clearance"] + [f"obstacle{k}" for k in keys]
        rows = []
        for r in steps:
            if "per_obstacle" not in r:
                continue
            per = r["per_obstacle"]
            rows.append([r["t"], r.get("robot", 0), r.get("index", ""),
                         r.get("min_clearance", r.get("clearance"))]
                        + [per.get(k, "") for k in keys])
        return head, rows
    names = []
    for r in steps:
        for n in r.get("positions", {}):
            if n not in names:
                names.append(n)
    if kind == "trajectories":
        head = ["t"] + [f"{n}_{a}" for n in names for a in ("x", "y")]
        rows = [[r["t"]] + [v for n in names for v in (r["positions"].get(n) or ["", ""])]
                for r in steps if "positions" in r]
        return head, rows
    if kind == "y-coordinate":
        head = ["t"] + [f"{n}_y" for n in names]
        rows = [[r["t"]] + [(r["positions"].get(n) or ["", ""])[1] for n in names]
                for r in steps if "positions" in r]
        return head, rows
    # distances: every robot to the nearest intruder (or obstacle centre)
    targets = [n for n in names if n.startswith(("intruder", "obstacle"))]
    if not targets and names:
        targets = names[:1]  # no intruder: spacing to the leader
    others = [n for n in names if n not in targets]
    head = ["t"] + [f"{n}_distance" for n in others]
    rows = []
    for r in steps:
        if "positions" not in r:
            continue
        pos = r["positions"]
        tg = [np.asarray(pos[n], float) for n in targets if n in pos]
        row = [r["t"]]
        for n in others:
            if n not in pos or not tg:
                row.append("")
                continue
            p = np.asarray(pos[n], float)
            row.append(float(min(math.hypot(*(p - q)) for q in tg)))
        rows.append(row)
    return head, rows


def write_csv(head, rows, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(head)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _summary_line(d):
    return " ".join(f"{k}={v}" for k, v in d.items())


def cmd_check(args):
    sc = _override(load_scenario(args.scenario), args.mode_override)
    ok, lines = check(sc)
    print(("FEASIBLE " if ok else "INFEASIBLE ") + " ".join(lines))
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_run(args):
    sc = _override(load_scenario(args.scenario), args.mode_override)
    tr, summary = run_trace(sc, args.seed)
    if args.out:
        tr.write(args.out)
    print(_summary_line({"seed": args.seed, **summary}))
    return EXIT_OK


def sweep_rows(sc, seeds, threads=None):
    """(header, rows); coverage scenarios pair IGD and sweep on each seed."""
    if sc["mode"] == "coverage":
        def one(seed):
            out = [seed]
            for m in ("igd", "sweep"):
                sub = {**sc, "team": {**sc["team"], "strategy": m}}
                _, s = run_trace(sub, seed)
                out.append(int(s["outcome"] == "detected"))
            return out
        rows = run_batch(one, seeds, threads)
        return ["seed", "igd_detected", "sweep_detected"], rows

    def one(seed):
        _, s = run_trace(sc, seed)
        return [seed] + [s.get(k, "") for k in sorted(s)]

    keys = sorted(run_trace(sc, seeds[0])[1]) if seeds else ["outcome"]
    return ["seed"] + keys, run_batch(one, seeds, threads)


def cmd_sweep(args):
    sc = _override(load_scenario(args.scenario), args.mode_override)
    seeds = list(range(args.seed, args.seed + args.seeds))
    head, rows = sweep_rows(sc, seeds)
    write_csv(head, rows, args.out)
    n = len(rows)
    say = print if args.out else (lambda m: print(m, file=sys.stderr))
    if sc["mode"] == "coverage":
        igd = sum(r[1] for r in rows) / n if n else float("nan")
        sw = sum(r[2] for r in rows) / n if n else float("nan")
        say(f"seeds={n} igd_rate={igd:.3f} sweep_rate={sw:.3f}")
    else:
        j = head.index("outcome")
        good = {"intercepted", "contained", "detected", "arrived", "safe", "no_crossing"}
        rate = sum(r[j] in good for r in rows) / n if n else float("nan")
        say(f"seeds={n} success_rate={rate:.3f}")
    return EXIT_OK


def cmd_plot_data(args):
    tr = SimTrace.read(args.trace)
    head, rows = plot_rows(tr, args.kind)
    write_csv(head, rows, args.out)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="pursuit-guard", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in ("check", "run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True)
        p.add_argument("--mode-override", default=None)
        if name != "check":
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--out", default=None)
        if name == "sweep":
            p.add_argument("--seeds", type=int, default=10)
    p = sub.add_parser("plot-data")
    p.add_argument("trace")
    p.add_argument("--kind", required=True, choices=PLOT_KINDS)
    p.add_argument("--out", default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    fn = {"check": cmd_check, "run": cmd_run, "sweep": cmd_sweep,
          "plot-data": cmd_plot_data}[args.cmd]
    try:
        return fn(args)
    except SchemaError as e:
        print(f"schema error [{e.field}]: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (PursuitGuardError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
