import numpy as np
import pytest
from scipy.integrate import quad

from swarmplan.bezier import BezierSpline, build_basis
from swarmplan.collision import HalfspaceConstraint
from swarmplan.dynamics import build_stacked, make_second_order_model, predict_states
from swarmplan.qp import (QpProblem, assemble, count_slacks, dump_problem,
                          energy_cost, error_cost, solve, violation_cost)

RNG = np.random.default_rng(99)


def check_kkt(prob, z, lam, mu, tol):
    """Independent KKT checker (kept free of the solver's own residual code)."""
    grad = prob.H @ z + prob.f
    if prob.Aeq.size:
        grad = grad + prob.Aeq.T @ lam
        assert np.abs(prob.Aeq @ z - prob.beq).max() < tol
    if prob.Ain.size:
        grad = grad + prob.Ain.T @ mu
        resid = prob.Ain @ z - prob.bin
        assert resid.max() < tol
        assert mu.min() > -tol
        assert np.abs(mu * resid).max() < tol
    assert np.abs(grad).max() < tol


def random_problem(rng, n_max=80, m_max=120):
    n = int(rng.integers(2, n_max + 1))
    meq = int(rng.integers(0, max(n // 2, 1)))
    m_in = int(rng.integers(0, m_max + 1))
    M = rng.standard_normal((n, n))
    H = M @ M.T + 0.05 * np.eye(n)
    f = rng.standard_normal(n)
    Aeq = rng.standard_normal((meq, n))
    beq = rng.standard_normal(meq)
    Ain = rng.standard_normal((m_in, n))
    anchor = np.linalg.lstsq(Aeq, beq, rcond=None)[0] if meq else np.zeros(n)
    bin_ = Ain @ anchor + rng.uniform(0.01, 2.0, m_in) if m_in else np.zeros(0)
    return QpProblem(H=H, f=f, Aeq=Aeq, beq=beq, Ain=Ain, bin=bin_, n_points=n)


def paper_setup():
    cfgK, l, p, h = 16, 3, 5, 0.2
    model = make_second_order_model(8.0, 0.7, h)
    sp = build_stacked(model, cfgK)
    basis = build_basis(l, p, [1.0, 1.0, 1.0], h, cfgK, max_deriv=2)
    return sp, basis


# ------------------------------------------------------------------ solver

def test_trivial_equality_pinned_minimum():
    prob = QpProblem(H=2 * np.eye(4), f=np.zeros(4),
                     Aeq=np.array([[1.0, 0, 0, 0]]), beq=np.array([1.0]),
                     Ain=np.zeros((0, 4)), bin=np.zeros(0), n_points=4)
    sol = solve(prob)
    assert sol.status == "optimal"
    assert np.abs(sol.z - [1, 0, 0, 0]).max() < 1e-9


def test_active_bound_one_dimensional():
    # min (z - 2)^2 s.t. z <= 1
    prob = QpProblem(H=np.array([[2.0]]), f=np.array([-4.0]),
                     Aeq=np.zeros((0, 1)), beq=np.zeros(0),
                     Ain=np.array([[1.0]]), bin=np.array([1.0]), n_points=1)
    sol = solve(prob)
    assert sol.status == "optimal"
    assert abs(sol.z[0] - 1.0) < 1e-9
    assert sol.ineq_multipliers[0] > 0


def test_equality_only_matches_kkt_solve():
    for _ in range(20):
        n = int(RNG.integers(3, 30))
        meq = int(RNG.integers(1, n))
        M = RNG.standard_normal((n, n))
        H = M @ M.T + 0.1 * np.eye(n)
        f = RNG.standard_normal(n)
        Aeq = RNG.standard_normal((meq, n))
        beq = RNG.standard_normal(meq)
        prob = QpProblem(H=H, f=f, Aeq=Aeq, beq=beq,
                         Ain=np.zeros((0, n)), bin=np.zeros(0), n_points=n)
        sol = solve(prob)
        K = np.block([[H, Aeq.T], [Aeq, np.zeros((meq, meq))]])
        ref = np.linalg.solve(K, np.concatenate([-f, beq]))[:n]
        assert sol.status == "optimal"
        assert np.abs(sol.z - ref).max() < 1e-8


def test_inconsistent_equalities_reported_infeasible():
    Aeq = np.array([[1.0, 0.0], [1.0, 0.0]])
    beq = np.array([0.0, 1.0])
    prob = QpProblem(H=np.eye(2), f=np.zeros(2), Aeq=Aeq, beq=beq,
                     Ain=np.zeros((0, 2)), bin=np.zeros(0), n_points=2)
    assert solve(prob).status == "infeasible"


def test_contradictory_inequalities_do_not_return_optimal():
    prob = QpProblem(H=np.eye(1), f=np.zeros(1),
                     Aeq=np.zeros((0, 1)), beq=np.zeros(0),
                     Ain=np.array([[1.0], [-1.0]]), bin=np.array([-1.0, -1.0]),
                     n_points=1)
    assert solve(prob).status in ("infeasible", "iteration-limit")


def test_thousand_random_instances_meet_kkt_tolerance():
    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(1000):
        prob = random_problem(rng)
        sol = solve(prob, tol=1e-6)
        assert sol.status == "optimal"
        check_kkt(prob, sol.z, sol.eq_multipliers, sol.ineq_multipliers, 1e-6)
        worst = max(worst, sol.kkt_residual)
    assert worst < 1e-6


def test_objective_monotone_under_added_constraints():
    rng = np.random.default_rng(321)
    for _ in range(30):
        prob = random_problem(rng, n_max=30, m_max=40)
        if prob.Ain.shape[0] < 2:
            continue
        sol_full = solve(prob)
        sub = QpProblem(H=prob.H, f=prob.f, Aeq=prob.Aeq, beq=prob.beq,
                        Ain=prob.Ain[:-1], bin=prob.bin[:-1],
                        n_points=prob.n_points)
        sol_sub = solve(sub)
        assert sol_full.objective >= sol_sub.objective - 1e-7


def test_determinism_bitwise():
    rng = np.random.default_rng(77)
    prob = random_problem(rng)
    a = solve(prob)
    b = solve(prob)
    assert np.array_equal(a.z, b.z)
    assert a.objective == b.objective


# -------------------------------------------------------------- cost terms

def test_error_cost_gradient_vanishes_at_goal_hold():
    sp, basis = paper_setup()
    goal = np.array([0.5, -0.5, 1.0])
    x0 = np.concatenate([goal, np.zeros(3)])
    spline = BezierSpline.constant(goal, 3, 5, [1.0, 1.0, 1.0])
    H, f = error_cost(sp, x0, goal, 3, 100.0, basis.sample_matrix)
    grad = H @ spline.points + f
    assert np.abs(grad).max() < 1e-8


def test_error_cost_matches_predict_then_sum_oracle():
    sp, basis = paper_setup()
    kappa, qk = 3, 100.0
    for _ in range(10):
        x0 = RNG.standard_normal(6)
        goal = RNG.standard_normal(3)
        z = RNG.standard_normal(54)
        H, f = error_cost(sp, x0, goal, kappa, qk, basis.sample_matrix)
        quad_form = 0.5 * z @ H @ z + f @ z

        X = predict_states(sp, x0, basis.sample_matrix @ z).reshape(16, 6)
        direct = sum(qk * np.sum((X[k - 1, :3] - goal) ** 2)
                     for k in range(16 - kappa, 17))
        X0 = predict_states(sp, x0, np.zeros(48)).reshape(16, 6)
        const = sum(qk * np.sum((X0[k - 1, :3] - goal) ** 2)
                    for k in range(16 - kappa, 17))
        assert abs(quad_form - (direct - const)) < 1e-8 * max(1.0, abs(direct))


def test_error_cost_kappa_validation():
    sp, basis = paper_setup()
    with pytest.raises(ValueError):
        error_cost(sp, np.zeros(6), np.zeros(3), 16, 100.0, basis.sample_matrix)


def test_energy_cost_zero_weights():
    _, basis = paper_setup()
    assert np.abs(energy_cost(basis, {})).max() == 0.0
    assert np.abs(energy_cost(basis, {2: 0.0})).max() == 0.0


def test_energy_cost_matches_quadrature():
    _, basis = paper_setup()
    alphas = {1: 0.3, 2: 0.008}
    H = energy_cost(basis, alphas)
    z = RNG.standard_normal(54)
    spline = BezierSpline(3, 5, [1.0, 1.0, 1.0], z)

    def integrand(t, c):
        v = spline.eval(t, deriv=c)
        return float(v @ v)

    ref = 0.0
    for c, a in alphas.items():
        for s in range(3):
            val, _ = quad(lambda t: integrand(s * 1.0 + t, c), 0.0, 1.0,
                          epsabs=1e-13, epsrel=1e-12, limit=200)
            ref += a * val
    assert abs(0.5 * z @ H @ z - ref) < 1e-8 * max(1.0, abs(ref))


def test_violation_cost_values():
    H, f = violation_cost(1, 1.0, -1e3)
    eps = np.array([-0.01])
    assert abs((0.5 * eps @ H @ eps + f @ eps) - 10.0001) < 1e-12
    H0, f0 = violation_cost(3, 1.0, -5e4)
    z0 = np.zeros(3)
    assert 0.5 * z0 @ H0 @ z0 + f0 @ z0 == 0.0
    with pytest.raises(ValueError):
        violation_cost(1, 0.0, -1e3)


# ---------------------------------------------------------------- assembly

def make_parts(cons, x0=None, space="input"):
    sp, basis = paper_setup()
    from swarmplan.bezier import (continuity_constraints,
                                  initial_condition_constraints,
                                  limit_constraints)
    A_cont, b_cont = continuity_constraints(3, 5, [1.0, 1.0, 1.0], 2)
    A_init, b_init = initial_condition_constraints(
        np.zeros((3, 3)), 3, 5, [1.0, 1.0, 1.0])
    lim = limit_constraints(basis, 2, -np.ones(3), np.ones(3))
    He, fe = error_cost(sp, np.zeros(6) if x0 is None else x0,
                        np.ones(3), 3, 100.0, basis.sample_matrix)
    Hen = energy_cost(basis, {2: 0.008})
    ns = count_slacks(cons, 6)
    return assemble(54, [(Hen, None), (He, fe)],
                    [(A_init, b_init), (A_cont, b_cont)], [lim], cons,
                    slack_costs=violation_cost(ns, 1.0, -5e4) if ns else None,
                    sample_matrix=basis.sample_matrix,
                    sample_offset=None, first_segment_points=6)


def test_assemble_no_neighbors():
    prob = make_parts([])
    assert prob.n_slack == 0
    assert prob.n == 54
    assert prob.Ain.shape[0] == 96          # only the limit rows
    assert prob.Aeq.shape[0] == 27


def test_assemble_one_ondemand_neighbor_counts():
    con = HalfspaceConstraint(normal=[1.0, 0, 0], offset=0.3, neighbor_id=1,
                              sample_index=4, slack=True)
    prob = make_parts([con])
    assert prob.n_slack == 1
    assert prob.Ain.shape[0] == 96 + 1 + 1   # limits + collision + slack bound
    assert prob.slack_index_range == (54, 55)


def test_assemble_bvc_block_counts():
    con = HalfspaceConstraint(normal=[1.0, 0, 0], offset=-0.15, neighbor_id=1,
                              sample_index=None, slack=False)
    prob = make_parts([con])
    assert prob.n_slack == 0
    assert prob.Ain.shape[0] == 96 + 6       # one row per first-segment point
    soft = HalfspaceConstraint(normal=[1.0, 0, 0], offset=-0.15, neighbor_id=1,
                               sample_index=None, slack=True)
    prob = make_parts([soft])
    assert prob.n_slack == 6
    assert prob.Ain.shape[0] == 96 + 6 + 6


def test_assembled_problem_solves_and_respects_collision_row():
    con = HalfspaceConstraint(normal=[1.0, 0, 0], offset=0.3, neighbor_id=1,
                              sample_index=4, slack=True)
    prob = make_parts([con])
    sol = solve(prob)
    assert sol.status == "optimal"
    spline = BezierSpline(3, 5, [1.0, 1.0, 1.0], sol.z[:54])
    eps = sol.z[54]
    sample = spline.eval(4 * 0.2)
    assert sample[0] >= 0.3 + eps - 1e-7
    assert eps <= 1e-12


def test_dump_problem_roundtrip(tmp_path):
    prob = make_parts([])
    path = tmp_path / "qp.txt"
    dump_problem(prob, path)
    text = path.read_text()
    for name in ("# H", "# f", "# Aeq", "# beq", "# Ain", "# bin"):
        assert name in text
