"""Single agent flying a 2 m transition under the receding-horizon planner.

Prints the convergence trace and shows how the emitted reference leads the
tracked position (the closed-loop model follows with a small delay).
"""

from pathlib import Path

import numpy as np

from swarmplan import PlannerConfig, ScenarioSpec, default_workspace, run_scenario

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

spec = ScenarioSpec(workspace=default_workspace(),
                    starts=[[-1.0, 0.0, 1.0]], goals=[[1.0, 0.0, 1.0]], seed=1)
cfg = PlannerConfig()
m = run_scenario(spec, cfg, record_trajectory=True)

print(f"success: {m.success}, transit {m.transit_time:.2f} s, "
      f"{m.n_cycles} planning cycles, {m.resets} resets")
print(f"largest reference jump between cycles: {m.max_boundary_jump:.2e} m")
tr = m.goal_trace
for frac in (0.25, 0.5, 0.75, 1.0):
    row = tr[int((len(tr) - 1) * frac)]
    print(f"  t={row[0]:5.2f} s  distance to goal {row[1]:.3f} m")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tj = m.trajectory
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(tj["t"], tj["states"][:, 0, 0], label="position x")
    ax.plot(tj["t"], tj["commands"][:, 0, 0], "--", label="reference x")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("x [m]")
    ax.set_title("tracked position vs commanded reference")
    ax.legend()
    fig.tight_layout()
    fig.savefig(OUT / "single_agent_tracking.png", dpi=120)
    print(f"figure saved to {OUT / 'single_agent_tracking.png'}")
except ImportError:
    print("matplotlib not available, skipping figures")
