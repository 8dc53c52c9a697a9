"""Five robots guard a straight wall against a faster intruder.

Prints the feasibility margin, then runs the worst-case intruder and reports
where (and whether) it was intercepted.
"""
from pathlib import Path

from pursuit_guard.cli import check, run_trace
from pursuit_guard.scenario import load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

for name in ("boundary_five", "boundary_sparse"):
    sc = load_scenario(SCENARIOS / f"{name}.json")
    ok, lines = check(sc)
    print(f"== {name}: {'feasible' if ok else 'infeasible'}")
    for line in lines:
        print("  ", line)
    trace, summary = run_trace(sc, seed=0)
    print("   outcome:", summary["outcome"], "after", len(trace.steps()), "steps")
