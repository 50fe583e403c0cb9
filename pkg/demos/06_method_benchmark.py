"""Desk-scale benchmark of the four avoidance methods.

Small version of the full `swarmplan compare` sweep: a few seeded random
transitions per swarm size, identical scenarios across methods.  Expect the
on-demand variants to finish transitions roughly twice as fast as the
buffered-cell variants, and the soft-cell QP to be the slowest to solve.
"""

import numpy as np

from swarmplan.cli import _aggregate, _run_grid
from swarmplan.config import load_config

cfg = load_config()
methods = ["bvc", "bvc-soft", "ondemand-state", "ondemand-input"]
counts = [6, 10]
trials = 3

rows = _run_grid(cfg, methods, counts, trials, base_seed=500)
agg = _aggregate(rows, methods, counts)

print(f"{'method':16s} {'n':>3s} {'success':>8s} {'transit[s]':>11s} {'qp[ms]':>8s}")
for method, count, ntr, rate, transit, qp in agg:
    tr = f"{transit:.2f}" if np.isfinite(transit) else "-"
    print(f"{method:16s} {count:3d} {rate:8.2f} {tr:>11s} {qp:8.2f}")

od = {c: t for m, c, _, _, t, _ in agg if m == "ondemand-input"}
bv = {c: t for m, c, _, _, t, _ in agg if m == "bvc"}
for c in counts:
    if np.isfinite(od[c]) and np.isfinite(bv[c]):
        print(f"n={c}: on-demand transits in {od[c] / bv[c]:.0%} "
              f"of the buffered-cell time")
