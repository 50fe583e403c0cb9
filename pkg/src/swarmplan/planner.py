"""Per-agent receding-horizon input updates with event-triggered replanning.

Each planning cycle an agent measures its state, decides whether to continue
its previous reference or reset it to the measured state (disturbance
detection), builds avoidance constraints from either measured neighbour
positions (buffered cells) or shared horizon predictions (on-demand), solves
its QP, broadcasts the new horizon, and emits finely sampled commands for the
next cycle.  Agents within a cycle only read a common snapshot, so updates
are safe to run in parallel.
"""

import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import bezier, qp
from .collision import (EllipsoidSpec, HorizonPrediction, HalfspaceConstraint,
                        combine_specs, detect_first_collision, min_distance_index,
                        bvc_halfspace, ondemand_constraint, scaled_distance)
from .dynamics import build_stacked, make_second_order_model, predict_states
from .errors import DegenerateGeometryError, StalePredictionError

log = logging.getLogger(__name__)

METHODS = ("bvc", "bvc-soft", "ondemand-state", "ondemand-input")


@dataclass
class PlannerConfig:
    """Planning parameters; defaults reproduce the reference tuning."""

    omega_n: float = 8.0
    damping: float = 0.7
    h: float = 0.2
    ts: float = 0.05
    horizon: int = 16          # K
    segments: int = 3          # l
    degree: int = 5            # p
    kappa: int = 3
    goal_weight: float = 100.0
    energy_weights: dict = field(default_factory=lambda: {2: 0.008})
    slack_quad: float = 1.0    # zeta
    slack_lin: float = -5e4    # xi (negative: penalize relaxation)
    deriv_limits: dict = field(default_factory=lambda: {2: 1.0})
    ellipsoid: EllipsoidSpec = field(
        default_factory=lambda: EllipsoidSpec((1.0, 1.0, 2.0), 0.3))
    f_min: float = -0.01
    f_max: float = 0.8
    eps_act: float = 0.01
    method: str = "ondemand-input"
    workspace: np.ndarray = field(
        default_factory=lambda: np.array([[-1.5, -1.5, 0.0], [1.5, 1.5, 2.0]]))
    cont_order: int = 2
    goal_tol: float = 0.10

    def __post_init__(self):
        self.workspace = np.asarray(self.workspace, dtype=float)
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.h <= 0 or self.ts <= 0:
            raise ValueError("h and ts must be positive")
        if abs(self.h / self.ts - round(self.h / self.ts)) > 1e-9:
            raise ValueError("ts must divide h")
        if not self.kappa < self.horizon:
            raise ValueError("kappa must be smaller than the horizon")
        if self.cont_order > self.degree:
            raise ValueError("continuity order exceeds the curve degree")

    @property
    def n_fine(self):
        return int(round(self.h / self.ts))

    @property
    def span(self):
        """Continuous horizon duration (K - 1) h."""
        return (self.horizon - 1) * self.h

    @property
    def durations(self):
        return np.full(self.segments, self.span / self.segments)

    @cached_property
    def model(self):
        return make_second_order_model(self.omega_n, self.damping, self.h)


class PlannerCore:
    """Matrices shared by every agent under one configuration."""

    def __init__(self, cfg):
        self.cfg = cfg
        K, l, p = cfg.horizon, cfg.segments, cfg.degree
        max_deriv = max([cfg.cont_order, 2, *cfg.energy_weights, *cfg.deriv_limits])
        self.sp = build_stacked(cfg.model, K)
        self.basis = bezier.build_basis(l, p, cfg.durations, cfg.h, K, max_deriv)
        self.phi = self.basis.sample_matrix
        self.n_points = self.basis.n_points

        self.A_cont, self.b_cont = bezier.continuity_constraints(
            l, p, cfg.durations, cfg.cont_order)
        self.A_init, _ = bezier.initial_condition_constraints(
            np.zeros((cfg.cont_order + 1, 3)), l, p, cfg.durations)

        blocks = [bezier.limit_constraints(self.basis, 0,
                                           cfg.workspace[0], cfg.workspace[1])]
        for c in sorted(cfg.deriv_limits):
            lim = cfg.deriv_limits[c]
            lo, hi = lim if isinstance(lim, (tuple, list)) else (-lim, lim)
            blocks.append(bezier.limit_constraints(self.basis, c, lo, hi))
        self.static_ineq = blocks

        self.H_energy = qp.energy_cost(self.basis, cfg.energy_weights)
        # Predicted-position map, shifted so rows 3k:3k+3 give p_hat[k] (k >= 1).
        pos_map = self.sp.Psel @ (self.sp.Lambda @ self.phi)
        self.state_mat = np.zeros_like(pos_map)
        self.state_mat[3:] = pos_map[:-3]
        pos_off = self.sp.Psel @ self.sp.A0
        self.state_off_mat = np.zeros_like(pos_off)
        self.state_off_mat[3:] = pos_off[:-3]


def build_core(cfg):
    return PlannerCore(cfg)


@dataclass
class AgentRuntime:
    """Per-agent state carried between planning cycles."""

    agent_id: int
    goal: np.ndarray
    spline: bezier.BezierSpline
    offset: float                  # plan time already consumed (grows on fallback)
    u_next: np.ndarray             # pending reference at the next cycle start
    prediction: HorizonPrediction
    stamp: int


def init_runtime(agent_id, start, goal, cfg):
    """Bootstrap state: hold position, static self-prediction."""
    start = np.asarray(start, float)
    spline = bezier.BezierSpline.constant(start, cfg.segments, cfg.degree,
                                          cfg.durations)
    block = np.tile(start, (cfg.horizon, 1))
    pred = HorizonPrediction(agent_id=agent_id, positions=block.copy(),
                             inputs=block.copy(), stamp=-1)
    return AgentRuntime(agent_id=agent_id, goal=np.asarray(goal, float),
                        spline=spline, offset=0.0, u_next=start.copy(),
                        prediction=pred, stamp=-1)


@dataclass
class AgentUpdate:
    """Result of one planning cycle for one agent."""

    fine_inputs: np.ndarray        # (n_fine, 3) commands for [t0, t0 + h)
    prediction: HorizonPrediction
    reset: bool
    status: str
    solve_ms: float
    cycle_ms: float
    boundary_jump: float           # |new reference(t0) - previous plan(t0)|


def activation(x, u_now, eps_act):
    """Disturbance indicator per axis: error^5 / -(v + sgn(v) eps).

    sgn(0) is taken as +1 so the guard always removes the singularity.
    """
    if not eps_act > 0:
        raise ValueError("eps_act must be positive")
    x = np.asarray(x, float)
    err = x[:3] - np.asarray(u_now, float)
    v = x[3:]
    sgn = np.where(v >= 0.0, 1.0, -1.0)
    return err ** 5 / -(v + sgn * eps_act)


def choose_initial_reference(x, prev_derivs, f, f_min, f_max):
    """Initial reference pins: continue the old plan, or reset on disturbance.

    Normal operation (f strictly inside (f_min, f_max) on every axis) keeps
    the previous plan's value and derivatives; otherwise the reference resets
    to the measured position and velocity with zero higher derivatives.
    """
    f = np.asarray(f, float)
    if np.all((f_min < f) & (f < f_max)):
        return np.asarray(prev_derivs, float), False
    x = np.asarray(x, float)
    u0 = np.zeros_like(np.asarray(prev_derivs, float))
    u0[0] = x[:3]
    if u0.shape[0] > 1:
        u0[1] = x[3:]
    return u0, True


def _fallback_normal(e, p_a, p_b):
    """Separating direction when anchor points coincide."""
    d = scaled_distance(e, p_a, p_b)
    if d > 0.0:
        return (np.asarray(p_a, float) - np.asarray(p_b, float)) / e.theta ** 2 / d
    log.warning("coincident measured positions, falling back to +x separation")
    return np.array([1.0, 0.0, 0.0])


def _neighbor_geometry(other, x_all, e):
    """Measured position and pairwise spec for an agent or obstacle."""
    if other.ellipsoid is None:
        return x_all[other.agent_id, :3], e
    return other.positions[0], combine_specs(e, other.ellipsoid)


def collision_tuple(rt, x_all, predictions, cfg):
    """Avoidance constraints for this cycle, per the configured method.

    Buffered-cell methods use measured states only; on-demand methods use the
    previous cycle's shared predictions.  Either way, only neighbours whose
    relevant distance comes under 2 r_min are constrained.
    """
    e = cfg.ellipsoid
    cons = []
    if cfg.method in ("bvc", "bvc-soft"):
        # Every neighbour contributes a cell face; far faces are simply inactive.
        soft = cfg.method == "bvc-soft"
        p_i = x_all[rt.agent_id, :3]
        for other in predictions:
            if other.agent_id == rt.agent_id:
                continue
            p_j, pair = _neighbor_geometry(other, x_all, e)
            try:
                cons.append(bvc_halfspace(p_i, p_j, pair, other.agent_id, slack=soft))
            except DegenerateGeometryError:
                normal = np.array([1.0, 0.0, 0.0])
                log.warning("agent %d coincides with neighbour %d",
                            rt.agent_id, other.agent_id)
                cons.append(HalfspaceConstraint(
                    normal=normal, offset=float(normal @ p_i) + pair.r_min / 2.0,
                    neighbor_id=other.agent_id, sample_index=None, slack=soft))
        return cons

    space = "state" if cfg.method == "ondemand-state" else "input"
    mine = rt.prediction
    for other in predictions:
        if other.agent_id == rt.agent_id:
            continue
        if other.stamp is not None and other.stamp != mine.stamp:
            raise StalePredictionError(
                f"neighbour {other.agent_id} stamped {other.stamp}, expected {mine.stamp}")
        pair = combine_specs(e, other.ellipsoid)
        xi_min, k_min = min_distance_index(mine, other, pair, space)
        if xi_min >= 2.0 * pair.r_min:
            continue
        k_c = detect_first_collision(mine, other, pair, space)
        k = k_c if k_c is not None else k_min
        p0 = mine.series(space)[k]
        pj = other.series(space)[k]
        sample = max(k - 1, 1)
        try:
            cons.append(ondemand_constraint(p0, pj, pair, sample, other.agent_id))
        except DegenerateGeometryError:
            p_j_meas, _ = _neighbor_geometry(other, x_all, e)
            normal = _fallback_normal(pair, x_all[rt.agent_id, :3], p_j_meas)
            cons.append(HalfspaceConstraint(
                normal=normal, offset=float(normal @ p0) + pair.r_min,
                neighbor_id=other.agent_id, sample_index=sample, slack=True))
    return cons


def _plan_eval(rt, tau, deriv=0):
    """Evaluate the stored plan tau seconds past the current cycle start."""
    t = min(rt.offset + tau, rt.spline.total_duration)
    return rt.spline.eval(t, deriv)


def update_agent(rt, x_all, predictions, cfg, core=None):
    """One full planning cycle for agent rt.agent_id.

    Returns the fine-rate commands for the next h seconds, the broadcast
    horizon prediction, and bookkeeping for metrics.  On solver failure the
    previous plan is shifted by one step and reused (its endpoint holds), so
    the emitted reference stays continuous.
    """
    t_start = time.perf_counter()
    if core is None:
        core = build_core(cfg)
    cfg = core.cfg
    x = np.asarray(x_all, float)[rt.agent_id]

    f_act = activation(x, rt.u_next, cfg.eps_act)
    prev_derivs = np.array([_plan_eval(rt, cfg.h, deriv=c)
                            for c in range(cfg.cont_order + 1)])
    u0, reset = choose_initial_reference(x, prev_derivs, f_act, cfg.f_min, cfg.f_max)

    cons = collision_tuple(rt, np.asarray(x_all, float), predictions, cfg)

    He, fe = qp.error_cost(core.sp, x, rt.goal, cfg.kappa, cfg.goal_weight, core.phi)
    n_slack = qp.count_slacks(cons, cfg.degree + 1)
    slack_costs = qp.violation_cost(n_slack, cfg.slack_quad, cfg.slack_lin) \
        if n_slack else None
    if cfg.method == "ondemand-state":
        sample_matrix, sample_offset = core.state_mat, core.state_off_mat @ x
    else:
        sample_matrix, sample_offset = core.phi, None

    problem = qp.assemble(
        core.n_points, [(core.H_energy, None), (He, fe)],
        [(core.A_init, u0.ravel()), (core.A_cont, core.b_cont)],
        core.static_ineq, cons, slack_costs=slack_costs,
        sample_matrix=sample_matrix, sample_offset=sample_offset,
        first_segment_points=cfg.degree + 1)
    sol, solve_ms = qp.solve_timed(problem)

    if sol.status == "optimal":
        spline = bezier.BezierSpline(cfg.segments, cfg.degree, cfg.durations,
                                     sol.z[:core.n_points])
        boundary_jump = float(np.linalg.norm(spline.eval(0.0) - prev_derivs[0]))
        rt.spline = spline
        rt.offset = 0.0
    else:
        rt.offset += cfg.h   # reuse the previous plan, shifted
        boundary_jump = 0.0

    K, h = cfg.horizon, cfg.h
    if rt.offset == 0.0:
        U = (core.phi @ rt.spline.points).reshape(K, 3)
    else:
        U = np.array([_plan_eval(rt, k * h) for k in range(K)])
    X = predict_states(core.sp, x, U.ravel())
    pos = (core.sp.Psel @ X).reshape(K, 3)
    positions = np.vstack([x[:3], pos[:K - 1]])
    stamp = rt.stamp + 1
    pred = HorizonPrediction(agent_id=rt.agent_id, positions=positions,
                             inputs=U, stamp=stamp)
    rt.prediction = pred
    rt.stamp = stamp
    rt.u_next = _plan_eval(rt, h)

    fine = np.array([_plan_eval(rt, j * cfg.ts) for j in range(cfg.n_fine)])
    cycle_ms = (time.perf_counter() - t_start) * 1e3
    return AgentUpdate(fine_inputs=fine, prediction=pred, reset=reset,
                       status=sol.status, solve_ms=solve_ms, cycle_ms=cycle_ms,
                       boundary_jump=boundary_jump)
