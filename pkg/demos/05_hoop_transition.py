"""Ten agents threading a 0.30 x 0.30 m wall gap (hoop passage).

The dividing wall is the union of four intersecting ellipsoidal obstacles;
agents start on one side and fly to mirrored goals on the other, queueing
through the gap.  Writes the distance-to-goal envelope CSV.
"""

from pathlib import Path

import numpy as np

from swarmplan import PlannerConfig, hoop_scenario, run_scenario
from swarmplan.sim import write_goal_envelope

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

spec = hoop_scenario(10)
cfg = PlannerConfig(method="ondemand-input", slack_lin=-1e3)
m = run_scenario(spec, cfg, stop_when="envelope", record_trajectory=True)

print(f"success: {m.success}, all goals within 0.10 m at {m.transit_time:.2f} s, "
      f"within 0.06 m at {m.envelope_time:.2f} s")
print(f"collisions: {m.collision}, obstacle hits: {m.obstacle_hit}")
print(f"min scaled inter-agent distance: {m.min_scaled_collision:.3f} m")
write_goal_envelope(m, OUT / "hoop_envelope.csv")
print(f"envelope written to {OUT / 'hoop_envelope.csv'}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tj = m.trajectory
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    for i in range(spec.n_agents):
        axes[0].plot(tj["states"][:, i, 0], tj["states"][:, i, 2], lw=0.8)
    gap = plt.Rectangle((-0.05, 0.85), 0.1, 0.30, color="k", alpha=0.15)
    axes[0].add_patch(gap)
    axes[0].set_xlabel("x [m]")
    axes[0].set_ylabel("z [m]")
    axes[0].set_title("side view: all agents funnel through the gap")

    tr = m.goal_trace
    axes[1].fill_between(tr[:, 0], tr[:, 1:].min(axis=1), tr[:, 1:].max(axis=1),
                         alpha=0.3)
    axes[1].axhline(0.06, color="green", ls="--", label="0.06 m envelope")
    axes[1].set_xlabel("t [s]")
    axes[1].set_ylabel("distance to goal [m]")
    axes[1].set_title("distance-to-goal envelope")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(OUT / "hoop_transition.png", dpi=120)
    print(f"figure saved to {OUT / 'hoop_transition.png'}")
except ImportError:
    print("matplotlib not available, skipping figures")
