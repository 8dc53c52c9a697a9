import math

import numpy as np
import pytest

from pursuit_guard import sim_engine as se
from pursuit_guard.errors import ConfigError, StateError
from pursuit_guard.geometry import ConvexRegion, ParamCurve

SQUARE = ConvexRegion.polygon([(0, 0), (10, 0), (10, 10), (0, 10)])
LINE = ParamCurve.segment((0, 0), (10, 0))


def boundary_world(strategy="worst_case", seed=0, coords=(2.0, 5.0, 8.0), pos=(5.0, 6.0)):
    return se.BoundaryWorld(LINE, SQUARE, list(coords), 3.0, 4.2, pos, epsilon=1.0,
                            strategy=se.intruder_strategy(strategy), seed=seed)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_canonical_json_sorted_and_compact():
    assert se.canonical_json({"b": np.float64(0.1), "a": np.arange(2)}) == '{"a":[0,1],"b":0.1}'


def test_canonical_json_non_finite():
    assert se.canonical_json({"x": math.inf}) == '{"x":"inf"}'


def test_scenario_hash_ignores_key_order():
    assert se.scenario_hash({"a": 1, "b": 2}) == se.scenario_hash({"b": 2, "a": 1})
    assert se.scenario_hash({"a": 1}) != se.scenario_hash({"a": 2})


def test_trace_round_trip_is_byte_identical():
    tr = se.SimTrace({"seed": 3, "mode": "boundary"})
    tr.add_step(0.0, coords=np.array([1.0, 2.5]))
    tr.add_event(0.1, "crossing", intercepted=True)
    text = tr.to_jsonl()
    assert se.SimTrace.from_jsonl(text).to_jsonl() == text
    assert text.splitlines()[0].startswith('{"mode":"boundary"')


def test_trace_without_header_rejected():
    with pytest.raises(StateError):
        se.SimTrace.from_jsonl('{"type":"step","t":0}\n')


# ---------------------------------------------------------------------------
# crossing detection
# ---------------------------------------------------------------------------

def test_detect_crossing_bisection():
    tau, x = se.detect_crossing(SQUARE, (5.0, 1.0), (5.0, -3.0))
    # the polygon test admits 1e-12 of slack on the edge
    assert tau == pytest.approx(0.25, abs=1e-9)
    assert x == pytest.approx([5.0, 0.0], abs=1e-9)
    assert se.detect_crossing(SQUARE, (5.0, 1.0), (5.0, 2.0)) is None


def test_locate_on_curves():
    assert se.locate_on_curves([LINE], (3.0, 0.0)) == (0, pytest.approx(3.0))
    assert se.locate_on_curves([LINE], (3.0, 1.0)) is None


def test_default_dt():
    assert se.default_dt(1.0, 4.0) == pytest.approx(0.025)


def test_unknown_strategy():
    with pytest.raises(ConfigError):
        se.intruder_strategy("teleport")


# ---------------------------------------------------------------------------
# worlds
# ---------------------------------------------------------------------------

def test_intruder_must_start_inside():
    with pytest.raises(StateError):
        boundary_world(pos=(5.0, 20.0))


def test_boundary_run_ends_with_crossing():
    w = boundary_world()
    tr = w.run(5000)
    assert w.done and w.crossing is not None
    (ev,) = tr.events("crossing")
    assert ev["t"] <= tr.steps()[-1]["t"] + 1e-12
    assert abs(w.intruder_pos[0][1]) < 1e-9


def test_robots_stay_ordered_during_run():
    tr = boundary_world("random_walk", seed=5).run(3000)
    for r in tr.steps():
        assert np.all(np.diff(r["coords"]) >= 0)


def test_waypoint_intruder_hits_waypoints():
    w = se.BoundaryWorld(LINE, SQUARE, [2.0, 5.0, 8.0], 3.0, 4.2, (5.0, 6.0), epsilon=1.0,
                         strategy=se.Waypoints([(2.0, 6.0), (2.0, 0.0)]), seed=0)
    tr = w.run(5000)
    xs = {round(r["intruder"][0], 9) for r in tr.steps()}
    assert 2.0 in xs
    assert w.crossing["pos"][0] == pytest.approx(2.0)


def test_replay_is_byte_identical():
    a = boundary_world("random_walk", seed=9).run(2000, header={"seed": 9}).to_jsonl()
    b = boundary_world("random_walk", seed=9).run(2000, header={"seed": 9}).to_jsonl()
    assert a == b


# ---------------------------------------------------------------------------
# batches
# ---------------------------------------------------------------------------

def test_thread_count_env_cap(monkeypatch):
    monkeypatch.setenv("PURSUIT_GUARD_THREADS", "2")
    assert se.thread_count(8) == 2
    monkeypatch.delenv("PURSUIT_GUARD_THREADS")
    assert se.thread_count(3) == 3


def test_run_batch_order_independent_of_threads():
    def job(seed):
        return boundary_world("random_walk", seed=seed).run(300).to_jsonl()
    seeds = list(range(6))
    assert se.run_batch(job, seeds, threads=1) == se.run_batch(job, seeds, threads=4)
