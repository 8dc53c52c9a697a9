"""A leader and four followers skirt a disk using sparse sensing.

Only switching points trigger a sensor sweep; between them the robots coast.
"""
import numpy as np

from pursuit_guard import switching_nav as sn
from pursuit_guard.geometry import Obstacle

eps = 0.9965
params = sn.SwitchingParams(eps, 0.05 * eps, 1.5)
team = sn.ChainTeam.line(np.array([0.0, -(3 + eps)]), (0, 1), 5, 0.8)
res = sn.run_chain([Obstacle.disk((0, 0), 3.0)], (0, 3 + eps + 3), team, params)

for i, step in enumerate(res["steps"]):
    print(f"step {i:2d} {step.kind:5s} clearance {step.min_clearance:.3f}")
lo, mean = sn.clearance_stats(res["steps"], kinds=("pesa",))
print(f"reached goal: {res['done']}  sensor calls: {res['sensor_calls']}")
print(f"clearance min {lo:.3f} mean {mean:.3f} (eps {eps})")

energy = sn.reference_energy_example()
print("switching computations:", energy["switching_computations"],
      " baseline packets:", round(energy["baseline_samples"]), "quoted:", energy["quoted_baseline"])
