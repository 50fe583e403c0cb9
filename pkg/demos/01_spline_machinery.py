"""Tour of the Bernstein spline machinery behind the planner.

Shows basis functions, the exactness of the power-basis sampling matrix,
and the closed-form derivative-energy Gram matrices against quadrature.
Figures land in demos/output/ when matplotlib is available.
"""

from pathlib import Path

import numpy as np
from scipy.integrate import quad

from swarmplan.bezier import (BezierSpline, bernstein, build_basis,
                              energy_gram, eval_segment)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(0)

# --- Bernstein basis: partition of unity --------------------------------
p, T = 5, 1.0
ts = np.linspace(0, T, 200)
basis_vals = np.array([[bernstein(p, m, T, t) for m in range(p + 1)] for t in ts])
print(f"degree-{p} Bernstein basis: sum over m deviates from 1 by "
      f"{np.abs(basis_vals.sum(axis=1) - 1).max():.2e}")

# --- exact sampling through the power basis -----------------------------
grid = dict(l=3, p=5, durations=[1.0, 1.0, 1.0], h=0.2, K=16)
sb = build_basis(**grid, max_deriv=2)
pts = rng.standard_normal(54)
spline = BezierSpline(3, 5, grid["durations"], pts)
samples = (sb.sample_matrix @ pts).reshape(16, 3)
direct = np.array([spline.eval(min(k * 0.2, 3.0)) for k in range(16)])
print(f"sampling matrix vs de Casteljau evaluation: "
      f"max difference {np.abs(samples - direct).max():.2e}")

# --- energy Grams vs adaptive quadrature --------------------------------
seg = rng.standard_normal((6, 3))
G = energy_gram(5, 1.0, 2)
closed = sum(seg[:, ax] @ G @ seg[:, ax] for ax in range(3))
ref, _ = quad(lambda t: float(eval_segment(seg, 1.0, t, 2) @
                              eval_segment(seg, 1.0, t, 2)), 0, 1,
              epsabs=1e-13, epsrel=1e-12, limit=200)
print(f"integral of |S''|^2: closed form {closed:.6f}, quadrature {ref:.6f}, "
      f"relative error {abs(closed - ref) / ref:.2e}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 3.5))
    for m in range(p + 1):
        axes[0].plot(ts, basis_vals[:, m], label=f"m={m}")
    axes[0].set_title("Bernstein basis, degree 5")
    axes[0].set_xlabel("t/T")
    axes[0].legend(fontsize=7)

    tt = np.linspace(0, 3.0, 400)
    curve = np.array([spline.eval(t) for t in tt])
    axes[1].plot(tt, curve)
    axes[1].plot(np.arange(16) * 0.2, samples, "k.", ms=4)
    axes[1].set_title("random 3-segment spline and its grid samples")
    axes[1].set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(OUT / "spline_machinery.png", dpi=120)
    print(f"figure saved to {OUT / 'spline_machinery.png'}")
except ImportError:
    print("matplotlib not available, skipping figures")
