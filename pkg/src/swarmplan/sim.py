"""Cycle-synchronous swarm simulator and scenario generators.

The world propagates the true tracking dynamics at the fine command rate Ts,
adds measurement noise once per planning cycle, injects scheduled state
disturbances, and checks collisions and goal arrival at every fine sample.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .collision import EllipsoidSpec, combine_specs, obstacle_as_neighbor, scaled_distance
from .dynamics import make_second_order_model
from .errors import ScenarioGenerationError
from .planner import build_core, init_runtime, update_agent

GOAL_TOL = 0.10          # success radius [m]
ENVELOPE_TOL = 0.06      # tighter radius used for convergence envelopes [m]


def default_collision_spec():
    """Ellipsoid used to declare collisions (tighter than the planning margin)."""
    return EllipsoidSpec((1.0, 1.0, 2.25), 0.2)


def default_workspace():
    """3 x 3 x 2 m flight volume (18 m^3)."""
    return np.array([[-1.5, -1.5, 0.0], [1.5, 1.5, 2.0]])


@dataclass
class Obstacle:
    center: np.ndarray
    spec: EllipsoidSpec

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)


@dataclass
class Disturbance:
    """Additive true-state offset applied at a given time."""

    time: float
    agent: int
    offset: np.ndarray   # (3,) position or (6,) full state offset

    def __post_init__(self):
        off = np.asarray(self.offset, dtype=float).ravel()
        if off.size == 3:
            off = np.concatenate([off, np.zeros(3)])
        if off.size != 6:
            raise ValueError("disturbance offset must have 3 or 6 entries")
        self.offset = off


@dataclass
class ScenarioSpec:
    """Workspace, transition task, obstacles, noise and disturbance schedule."""

    workspace: np.ndarray
    starts: np.ndarray
    goals: np.ndarray
    obstacles: list = field(default_factory=list)
    duration_limit: float = 20.0
    sigma_p: float = 0.005
    sigma_v: float = 0.02
    disturbances: list = field(default_factory=list)
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        self.workspace = np.asarray(self.workspace, dtype=float)
        self.starts = np.atleast_2d(np.asarray(self.starts, dtype=float))
        self.goals = np.atleast_2d(np.asarray(self.goals, dtype=float))

    @property
    def n_agents(self):
        return self.starts.shape[0]

    @property
    def agents(self):
        return list(zip(self.starts, self.goals))


def validate_scenario(spec, e):
    """Reject tasks that are unsafe before they start."""
    lo, hi = spec.workspace
    if spec.starts.shape != spec.goals.shape:
        raise ValueError("starts and goals must pair up")
    for name, pts in (("start", spec.starts), ("goal", spec.goals)):
        if np.any(pts < lo - 1e-9) or np.any(pts > hi + 1e-9):
            raise ValueError(f"{name} positions must lie inside the workspace")
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if scaled_distance(e, pts[i], pts[j]) < e.r_min:
                    raise ValueError(
                        f"{name} positions {i} and {j} are closer than r_min")
    for obs in spec.obstacles:
        pair = combine_specs(e, obs.spec)
        for pts in (spec.starts, spec.goals):
            for i, pnt in enumerate(pts):
                if scaled_distance(pair, pnt, obs.center) < pair.r_min:
                    raise ValueError(f"agent {i} endpoint is inside an obstacle")


def measure(states, rng, sigma_p, sigma_v):
    """Measured states: truth plus independent zero-mean Gaussian noise."""
    scale = np.array([sigma_p] * 3 + [sigma_v] * 3)
    return states + rng.standard_normal(states.shape) * scale


def step_world(states, fine_inputs, model, disturbances=()):
    """Propagate true states through one planning period of fine commands.

    fine_inputs is (N, n_fine, 3); the model must be discretized at the fine
    step.  disturbances is a list of (substep, agent, offset6) applied after
    the given substep.  Returns the (n_fine, N, 6) trail of true states.
    """
    states = np.asarray(states, float).copy()
    fine_inputs = np.asarray(fine_inputs, float)
    n_fine = fine_inputs.shape[1]
    by_step = {}
    for j, agent, off in disturbances:
        by_step.setdefault(int(j), []).append((agent, off))
    trail = np.empty((n_fine, states.shape[0], 6))
    for j in range(n_fine):
        states = states @ model.A.T + fine_inputs[:, j, :] @ model.B.T
        for agent, off in by_step.get(j, ()):
            states[agent] += off
        trail[j] = states
    return trail


def collision_check(positions, coll):
    """First agent pair closer than r_coll under the collision ellipsoid."""
    n = len(positions)
    if n < 2:
        return None
    scaled = np.asarray(positions, float) / coll.theta
    diff = scaled[:, None, :] - scaled[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    dist[np.arange(n), np.arange(n)] = np.inf
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    if dist[i, j] < coll.r_min:
        return (min(i, j), max(i, j))
    return None


def obstacle_check(positions, obstacles, ratio):
    """First (agent, obstacle) pair inside the scaled-down obstacle ellipsoid."""
    for i, p in enumerate(positions):
        for m, obs in enumerate(obstacles):
            if scaled_distance(obs.spec, p, obs.center) < obs.spec.r_min * ratio:
                return (i, m)
    return None


def _min_pairwise(positions, e):
    n = len(positions)
    if n < 2:
        return np.inf
    scaled = positions / e.theta
    diff = scaled[:, None, :] - scaled[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    dist[np.arange(n), np.arange(n)] = np.inf
    return float(dist.min())


@dataclass
class RunMetrics:
    """Outcome and traces of one simulated transition task."""

    success: bool
    transit_time: float                 # nan when the task never completed
    min_scaled_collision: float         # under the collision-check ellipsoid
    min_scaled_planning: float          # under the planning ellipsoid
    collision: Optional[tuple]          # (t, i, j)
    obstacle_hit: Optional[tuple]       # (t, agent, obstacle)
    resets: int
    reset_events: list                  # (t_cycle, agent)
    solve_times_ms: np.ndarray          # per (cycle, agent)
    cycle_times_ms: np.ndarray
    statuses: dict                      # solver status -> count
    max_boundary_jump: float            # across no-reset cycles
    n_cycles: int
    failure_reason: Optional[str]
    goal_trace: Optional[np.ndarray]    # (samples, 1 + N): t, per-agent distance
    envelope_time: float                # first time all agents inside ENVELOPE_TOL
    trajectory: Optional[dict] = None   # times/states/commands/reset flags at Ts


def run_scenario(spec, cfg, coll=None, record_traces=True, stop_when="goal",
                 record_trajectory=False):
    """Simulate one transition task under the given planner configuration.

    stop_when selects the end condition: "goal" stops once every agent is
    within the success radius, "envelope" once every agent is within the
    tighter envelope radius, "duration" runs out the clock.  Collisions always
    stop the run.
    """
    if stop_when not in ("goal", "envelope", "duration"):
        raise ValueError(f"unknown stop_when {stop_when!r}")
    validate_scenario(spec, cfg.ellipsoid)
    coll = coll or default_collision_spec()
    core = build_core(cfg)
    world = make_second_order_model(cfg.omega_n, cfg.damping, cfg.ts)
    rng = np.random.default_rng([spec.seed, 1])

    n = spec.n_agents
    states = np.zeros((n, 6))
    states[:, :3] = spec.starts
    runtimes = [init_runtime(i, spec.starts[i], spec.goals[i], cfg) for i in range(n)]
    obstacle_preds = [obstacle_as_neighbor(o.center, o.spec, cfg.horizon, -(m + 1))
                      for m, o in enumerate(spec.obstacles)]
    agent_preds = [rt.prediction for rt in runtimes]
    ratio = coll.r_min / cfg.ellipsoid.r_min

    solve_times, cycle_times, reset_events = [], [], []
    traj_t, traj_x, traj_u, traj_reset = [], [], [], []
    statuses = {}
    max_jump = 0.0
    min_coll = _min_pairwise(spec.starts, coll)
    min_plan = _min_pairwise(spec.starts, cfg.ellipsoid)
    collision = obstacle_hit = None
    transit = envelope_t = None
    trace = []
    failure = None

    dists0 = np.linalg.norm(spec.starts - spec.goals, axis=1)
    if record_traces:
        trace.append(np.concatenate([[0.0], dists0]))
    if np.all(dists0 <= cfg.goal_tol):
        transit = 0.0
    if np.all(dists0 <= ENVELOPE_TOL):
        envelope_t = 0.0

    def finished():
        if stop_when == "goal":
            return transit is not None
        if stop_when == "envelope":
            return envelope_t is not None
        return False

    t = 0.0
    cycle = 0
    pending = sorted(spec.disturbances, key=lambda d: d.time)
    while not finished() and collision is None and obstacle_hit is None \
            and t < spec.duration_limit - 1e-9:
        measured = measure(states, rng, spec.sigma_p, spec.sigma_v)
        snapshot = agent_preds + obstacle_preds
        updates = []
        try:
            for rt in runtimes:
                updates.append(update_agent(rt, measured, snapshot, cfg, core))
        except Exception as exc:  # planner hard failure: record and stop
            failure = f"planner: {exc}"
            break
        agent_preds = [u.prediction for u in updates]
        for i, u in enumerate(updates):
            solve_times.append(u.solve_ms)
            cycle_times.append(u.cycle_ms)
            statuses[u.status] = statuses.get(u.status, 0) + 1
            if u.reset:
                reset_events.append((t, i))
            else:
                max_jump = max(max_jump, u.boundary_jump)

        fine = np.stack([u.fine_inputs for u in updates])
        cycle_resets = np.array([u.reset for u in updates])
        due = []
        for d in pending:
            if t < d.time <= t + cfg.h + 1e-12:
                sub = int(np.ceil((d.time - t) / cfg.ts - 1e-9)) - 1
                due.append((min(max(sub, 0), cfg.n_fine - 1), d.agent, d.offset))
        prev_states = states
        trail = step_world(states, fine, world, due)
        states = trail[-1]

        for j in range(cfg.n_fine):
            t_sub = t + (j + 1) * cfg.ts
            pos = trail[j, :, :3]
            if record_trajectory:
                traj_t.append(t + j * cfg.ts)
                traj_x.append(trail[j - 1] if j else prev_states)
                traj_u.append(fine[:, j, :])
                traj_reset.append(cycle_resets)
            min_coll = min(min_coll, _min_pairwise(pos, coll))
            min_plan = min(min_plan, _min_pairwise(pos, cfg.ellipsoid))
            pair = collision_check(pos, coll)
            if pair is not None:
                collision = (t_sub, *pair)
                break
            hit = obstacle_check(pos, spec.obstacles, ratio)
            if hit is not None:
                obstacle_hit = (t_sub, *hit)
                break
            dists = np.linalg.norm(pos - spec.goals, axis=1)
            if record_traces:
                trace.append(np.concatenate([[t_sub], dists]))
            if envelope_t is None and np.all(dists <= ENVELOPE_TOL):
                envelope_t = t_sub
            if transit is None and np.all(dists <= cfg.goal_tol):
                transit = t_sub
            if finished():
                break
        t += cfg.h
        cycle += 1

    success = transit is not None and collision is None and obstacle_hit is None \
        and failure is None
    if failure is None and not success:
        failure = ("collision" if collision else
                   "obstacle" if obstacle_hit else "timeout")
    return RunMetrics(
        success=success,
        transit_time=transit if transit is not None else float("nan"),
        min_scaled_collision=min_coll, min_scaled_planning=min_plan,
        collision=collision, obstacle_hit=obstacle_hit,
        resets=len(reset_events), reset_events=reset_events,
        solve_times_ms=np.asarray(solve_times), cycle_times_ms=np.asarray(cycle_times),
        statuses=statuses, max_boundary_jump=max_jump, n_cycles=cycle,
        failure_reason=None if success else failure,
        goal_trace=np.asarray(trace) if record_traces else None,
        envelope_time=envelope_t if envelope_t is not None else float("nan"),
        trajectory=dict(t=np.asarray(traj_t), states=np.asarray(traj_x),
                        commands=np.asarray(traj_u),
                        resets=np.asarray(traj_reset))
        if record_trajectory else None)


def write_goal_envelope(metrics, path):
    """CSV of the distance-to-goal envelope (min and max across agents)."""
    if metrics.goal_trace is None:
        raise ValueError("run was executed without traces")
    tr = metrics.goal_trace
    with open(path, "w") as fh:
        fh.write("t,dist_min,dist_max\n")
        for row in tr:
            fh.write(f"{row[0]:.9g},{row[1:].min():.9g},{row[1:].max():.9g}\n")


def random_transition_scenario(n_agents, workspace=None, seed=0, e=None,
                               margin=0.15, max_attempts=50000):
    """Uniformly sampled starts and goals with pairwise scaled spacing >= r_min."""
    workspace = np.asarray(workspace, float) if workspace is not None \
        else default_workspace()
    e = e or EllipsoidSpec((1.0, 1.0, 2.0), 0.3)
    rng = np.random.default_rng([seed, 0])
    lo, hi = workspace[0] + margin, workspace[1] - margin

    def sample_set():
        pts = []
        attempts = 0
        while len(pts) < n_agents:
            attempts += 1
            if attempts > max_attempts:
                raise ScenarioGenerationError(
                    f"could not place {n_agents} agents in the workspace")
            cand = rng.uniform(lo, hi)
            if all(scaled_distance(e, cand, q) >= e.r_min for q in pts):
                pts.append(cand)
        return np.array(pts)

    starts = sample_set()
    goals = sample_set()
    return ScenarioSpec(workspace=workspace, starts=starts, goals=goals,
                        seed=seed, name=f"random-{n_agents}")


HOOP_DIAMETER = 0.85
HOOP_GAP = 0.30


def hoop_wall_obstacles(gap_center=(0.0, 0.0, 1.0), r_min=0.6):
    """Four intersecting ellipsoids forming a wall with a square passage gap.

    The obstacles carry a larger safety radius than the agents so the wall is
    deep in the scaled metric (soft constraint violations cannot tunnel
    through it), and semi-axes never fall below the agent ellipsoid, so the
    pairwise max combination rule does not inflate the wall into the gap.
    """
    cx, cy, cz = gap_center
    half = HOOP_GAP / 2.0

    def ell(center, semi):
        return Obstacle(np.asarray(center, float),
                        EllipsoidSpec(np.asarray(semi, float) / r_min, r_min))

    return [
        ell((cx, cy, cz - half - 1.2), (0.6, 8.0, 1.2)),      # below the gap
        ell((cx, cy, cz + half + 1.2), (0.6, 8.0, 1.2)),      # above the gap
        ell((cx, cy - half - 1.35, cz), (0.6, 1.35, 1.2)),    # left of the gap
        ell((cx, cy + half + 1.35, cz), (0.6, 1.35, 1.2)),    # right of the gap
    ]


def hoop_scenario(n_agents, duration_limit=60.0, seed=0):
    """Transition through a narrow wall gap: starts one side, goals antipodal.

    The dividing wall is the union of four intersecting ellipsoids leaving a
    0.30 x 0.30 m passage centered on the hoop position; goals mirror the
    starts through the wall plane, so every agent must thread the gap.
    """
    if n_agents % 2:
        raise ValueError("the antipodal exchange needs an even agent count")
    workspace = default_workspace()
    gap_center = np.array([0.0, 0.0, 1.0])
    obstacles = hoop_wall_obstacles(gap_center)

    rows = (0.55, 1.45) if n_agents <= 14 else (0.4, 1.0, 1.6)
    cols = int(np.ceil(n_agents / len(rows)))
    ys = np.linspace(-1.0, 1.0, cols) if cols > 1 else np.array([0.0])
    starts = []
    for z in rows:
        for y in ys:
            starts.append((-1.1, y, z))
    starts = np.array(starts[:n_agents])
    # stagger wall distance so arrivals queue instead of jamming the funnel
    starts[:, 0] = -0.85 - 0.06 * np.arange(n_agents)
    goals = starts.copy()
    goals[:, 0] = 2.0 * gap_center[0] - goals[:, 0]   # mirror through the wall
    return ScenarioSpec(workspace=workspace, starts=starts, goals=goals,
                        obstacles=obstacles, duration_limit=duration_limit,
                        seed=seed, name=f"hoop-{n_agents}")
