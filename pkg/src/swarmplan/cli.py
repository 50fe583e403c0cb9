"""Command-line front end: simulation, method comparison, runtime benchmark.

Subcommands:
  simulate       run one scenario, dump trajectory + metrics
  compare        seeded multi-method success/transit-time sweep
  bench-runtime  per-agent QP solve-time benchmark over swarm sizes
  dump-config    print the default configuration

Exit codes: 0 success, 1 task failure (run finished, goals/collisions failed),
2 usage or configuration errors.  SWARMPLAN_WORKERS bounds the worker pool
for trial-level parallelism.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import (collision_spec, dump_config, load_config, planner_config)
from .planner import METHODS
from .sim import (hoop_scenario, random_transition_scenario, run_scenario,
                  write_goal_envelope)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return "" if np.isnan(x) else f"{x:.9g}"
    return str(x)


def _write_csv(path, header, rows):
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    os.replace(tmp, path)


def _workers():
    env = os.environ.get("SWARMPLAN_WORKERS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def _build_scenario(cfg, kind, n_agents, seed, pcfg):
    sc = cfg["scenario"]
    if kind == "hoop":
        spec = hoop_scenario(n_agents, seed=seed)
    else:
        spec = random_transition_scenario(
            n_agents, workspace=np.asarray(sc["workspace"], float), seed=seed,
            e=pcfg.ellipsoid, margin=float(sc["margin"]))
        spec.duration_limit = float(sc["duration_limit"])
    spec.sigma_p = float(cfg["noise"]["sigma_p"])
    spec.sigma_v = float(cfg["noise"]["sigma_v"])
    return spec


def _trial_seed(base, count, trial):
    return base + 1000 * count + trial


# ------------------------------------------------------------------ simulate

def cmd_simulate(args):
    cfg = load_config(args.config)
    pcfg = planner_config(cfg, method=args.method)
    coll = collision_spec(cfg)
    spec = _build_scenario(cfg, args.scenario, args.agents, args.seed, pcfg)
    if args.duration is not None:
        spec.duration_limit = args.duration

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m = run_scenario(spec, pcfg, coll=coll, record_trajectory=True,
                     stop_when=args.stop)

    tr = m.trajectory
    rows = []
    for s in range(len(tr["t"])):
        for i in range(spec.n_agents):
            x = tr["states"][s, i]
            u = tr["commands"][s, i]
            rows.append([tr["t"][s], i, *x[:3], *x[3:], *u,
                         int(tr["resets"][s, i])])
    _write_csv(out / "trajectory.csv",
               ["t", "agent_id", "px", "py", "pz", "vx", "vy", "vz",
                "ux", "uy", "uz", "reset_flag"], rows)
    write_goal_envelope(m, out / "envelope.csv")
    _write_csv(out / "metrics.csv", _trial_header(),
               [_trial_row(pcfg.method, spec.n_agents, 0, spec.seed, m)])

    summary = [
        f"scenario: {spec.name} agents={spec.n_agents} seed={spec.seed} "
        f"method={pcfg.method}",
        f"success: {m.success}" + (f" ({m.failure_reason})" if not m.success else ""),
        f"transit_time_s: {_fmt(m.transit_time)}",
        f"envelope_time_s: {_fmt(m.envelope_time)}",
        f"min_scaled_dist_m: {m.min_scaled_planning:.4f} (planning) / "
        f"{m.min_scaled_collision:.4f} (collision metric)",
        f"resets: {m.resets}",
        f"cycles: {m.n_cycles}",
        f"mean_qp_ms: {m.solve_times_ms.mean():.3f}" if m.solve_times_ms.size else "",
    ]
    (out / "summary.txt").write_text("\n".join(s for s in summary if s) + "\n")
    print("\n".join(s for s in summary if s))
    return 0 if m.success else 1


# ------------------------------------------------------------------- compare

def _trial_header():
    return ["method", "n_agents", "trial", "seed", "success", "transit_time_s",
            "min_scaled_dist_m", "resets", "failure", "mean_qp_ms", "p95_qp_ms",
            "mean_cycle_ms"]


def _trial_row(method, count, trial, seed, m):
    st = m.solve_times_ms
    ct = m.cycle_times_ms
    return [method, count, trial, seed, m.success, m.transit_time,
            m.min_scaled_planning, m.resets, m.failure_reason or "",
            st.mean() if st.size else float("nan"),
            float(np.percentile(st, 95)) if st.size else float("nan"),
            ct.mean() if ct.size else float("nan")]


def _run_trial(payload):
    cfg, method, count, trial, seed, stop_when = payload
    pcfg = planner_config(cfg, method=method)
    coll = collision_spec(cfg)
    spec = _build_scenario(cfg, "random", count, seed, pcfg)
    try:
        m = run_scenario(spec, pcfg, coll=coll, record_traces=False,
                         stop_when=stop_when)
        return _trial_row(method, count, trial, seed, m)
    except Exception as exc:  # recorded per-row, the sweep continues
        return [method, count, trial, seed, False, float("nan"), float("nan"),
                0, f"error: {exc}", float("nan"), float("nan"), float("nan")]


def _run_grid(cfg, methods, counts, trials, base_seed, stop_when="goal"):
    payloads = [(cfg, method, count, trial,
                 _trial_seed(base_seed, count, trial), stop_when)
                for method in methods for count in counts
                for trial in range(trials)]
    workers = _workers()
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_trial, payloads))
    else:
        rows = [_run_trial(p) for p in payloads]
    order = {m: i for i, m in enumerate(methods)}
    rows.sort(key=lambda r: (order[r[0]], r[1], r[2]))
    return rows


def _aggregate(rows, methods, counts):
    agg = []
    for method in methods:
        for count in counts:
            sel = [r for r in rows if r[0] == method and r[1] == count]
            if not sel:
                continue
            succ = [r for r in sel if r[4]]
            rate = len(succ) / len(sel)
            transit = float(np.mean([r[5] for r in succ])) if succ else float("nan")
            qp = float(np.mean([r[9] for r in sel if not np.isnan(r[9])]))
            agg.append([method, count, len(sel), rate, transit, qp])
    return agg


def cmd_compare(args):
    cfg = load_config(args.config)
    methods = args.methods.split(",") if args.methods \
        else cfg["benchmark"]["methods"]
    for m in methods:
        if m not in METHODS:
            print(f"unknown method {m!r}", file=sys.stderr)
            return 2
    counts = [int(c) for c in args.counts.split(",")] if args.counts \
        else [int(c) for c in cfg["benchmark"]["counts"]]
    trials = args.trials if args.trials is not None \
        else int(cfg["benchmark"]["trials"])
    base_seed = args.seed if args.seed is not None \
        else int(cfg["benchmark"]["base_seed"])

    rows = _run_grid(cfg, methods, counts, trials, base_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trials.csv", _trial_header(), rows)
    agg = _aggregate(rows, methods, counts)
    _write_csv(out / "aggregate.csv",
               ["method", "n_agents", "trials", "success_rate",
                "mean_transit_s", "mean_qp_ms"], agg)

    lines = [f"{'method':16s} {'n':>3s} {'trials':>6s} {'success':>8s} "
             f"{'transit[s]':>10s} {'qp[ms]':>8s}"]
    for method, count, ntr, rate, transit, qp in agg:
        lines.append(f"{method:16s} {count:3d} {ntr:6d} {rate:8.2f} "
                     f"{_fmt(transit):>10s} {qp:8.2f}")
    text = "\n".join(lines)
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    return 0


# ------------------------------------------------------------- bench-runtime

def cmd_bench_runtime(args):
    cfg = load_config(args.config)
    methods = args.methods.split(",") if args.methods \
        else cfg["benchmark"]["methods"]
    for m in methods:
        if m not in METHODS:
            print(f"unknown method {m!r}", file=sys.stderr)
            return 2
    counts = [int(c) for c in args.counts.split(",")] if args.counts \
        else [10, 20, 30, 40]
    trials = args.trials if args.trials is not None else 3
    base_seed = args.seed if args.seed is not None \
        else int(cfg["benchmark"]["base_seed"])
    cfg = json.loads(json.dumps(cfg))
    cfg["scenario"]["duration_limit"] = float(args.duration)

    rows = []
    for method in methods:
        for count in counts:
            qps, cycles = [], []
            for trial in range(trials):
                seed = _trial_seed(base_seed, count, trial)
                pcfg = planner_config(cfg, method=method)
                spec = _build_scenario(cfg, "random", count, seed, pcfg)
                m = run_scenario(spec, pcfg, coll=collision_spec(cfg),
                                 record_traces=False, stop_when="duration")
                qps.append(m.solve_times_ms)
                cycles.append(m.cycle_times_ms)
            qps = np.concatenate(qps)
            cycles = np.concatenate(cycles)
            rows.append([method, count, trials, qps.mean(), qps.std(),
                         cycles.mean(), cycles.std()])
            print(f"{method:16s} n={count:3d} qp {qps.mean():7.2f} "
                  f"+- {qps.std():6.2f} ms   cycle {cycles.mean():7.2f} ms",
                  flush=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "runtime.csv",
               ["method", "n_agents", "trials", "mean_qp_ms", "std_qp_ms",
                "mean_cycle_ms", "std_cycle_ms"], rows)
    return 0


# --------------------------------------------------------------------- main

def make_parser():
    ap = argparse.ArgumentParser(
        prog="swarmplan",
        description="Distributed receding-horizon swarm trajectory benchmarks")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and dump results")
    sim.add_argument("--config", default=None)
    sim.add_argument("--agents", type=int, default=10)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--method", default=None, choices=METHODS)
    sim.add_argument("--scenario", default="random", choices=["random", "hoop"])
    sim.add_argument("--duration", type=float, default=None)
    sim.add_argument("--stop", default="goal",
                     choices=["goal", "envelope", "duration"])
    sim.add_argument("--out", default="out/simulate")
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser("compare", help="seeded multi-method benchmark")
    cmp_.add_argument("--config", default=None)
    cmp_.add_argument("--methods", default=None,
                      help="comma list; default from config")
    cmp_.add_argument("--counts", default=None, help="comma list of agent counts")
    cmp_.add_argument("--trials", type=int, default=None)
    cmp_.add_argument("--seed", type=int, default=None)
    cmp_.add_argument("--out", default="out/compare")
    cmp_.set_defaults(func=cmd_compare)

    bench = sub.add_parser("bench-runtime", help="QP solve-time benchmark")
    bench.add_argument("--config", default=None)
    bench.add_argument("--methods", default=None)
    bench.add_argument("--counts", default=None)
    bench.add_argument("--trials", type=int, default=None)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--duration", type=float, default=4.0,
                       help="simulated seconds per timing trial")
    bench.add_argument("--out", default="out/bench")
    bench.set_defaults(func=cmd_bench_runtime)

    dump = sub.add_parser("dump-config", help="print the default configuration")
    dump.add_argument("--out", default=None)
    dump.set_defaults(func=lambda a: print(dump_config(load_config(), a.out)) or 0)
    return ap


def main(argv=None):
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
