"""Two arcs of robots protect a disk from one and then three intruders."""
from pathlib import Path

from pursuit_guard.cli import run_trace
from pursuit_guard.scenario import load_scenario

sc = load_scenario(Path(__file__).resolve().parent.parent / "scenarios" / "siege_ring.json")
for seed in range(3):
    _, summary = run_trace(sc, seed)
    print(f"seed {seed}: {summary['outcome']}")
