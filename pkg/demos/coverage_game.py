"""Game-theoretic coverage against a fixed sweep, 100 trials each."""
from pursuit_guard import game_coverage as gc

for team in ("igd", "sweep"):
    hits = sum(gc.run_coverage_trial(team, seed)[0] for seed in range(100))
    print(f"{team:5s}: detected in {hits}/100 trials, "
          f"full coverage every {gc.coverage_period(team)} steps")

print("formation ratio at the calibrated lambda:",
      round(gc.formation_ratio(2.0, gc.LAMBDA_R2_FIVE / 4.0), 6))
