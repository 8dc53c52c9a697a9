"""A robot threads four moving obstacles with a capped repulsive field."""
from pursuit_guard import force_field as ff

eps = 0.5
worst = min(ff.reference_layout_world(seed=s, epsilon=eps, dt=0.01).run(500)["min_clearance"]
            for s in range(20))
print(f"minimum clearance over 20 seeds: {worst:.3f} m (eps {eps} m)")
