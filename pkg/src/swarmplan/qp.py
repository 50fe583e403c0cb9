"""Per-agent quadratic program: cost terms, assembly, and a dense solver.

The decision vector is z = (control points, slack variables).  Costs follow
the convention J(z) = 1/2 z' H z + f' z; constraints are A_eq z = b_eq and
A_in z <= b_in.  Problems are small (tens of variables), so the solver is a
dense active-set method built on repeated KKT solves.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

REGULARIZATION = 1e-9   # added to H inside solve() to guarantee strict convexity


@dataclass
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    Aeq: np.ndarray
    beq: np.ndarray
    Ain: np.ndarray
    bin: np.ndarray
    n_points: int
    n_slack: int = 0

    @property
    def n(self):
        return self.n_points + self.n_slack

    @property
    def slack_index_range(self):
        return (self.n_points, self.n)


@dataclass
class QpSolution:
    z: Optional[np.ndarray]
    status: str                      # optimal | infeasible | iteration-limit
    objective: float = np.nan
    kkt_residual: float = np.nan
    eq_multipliers: Optional[np.ndarray] = None
    ineq_multipliers: Optional[np.ndarray] = None
    iterations: int = 0


def error_cost(sp, x0, goal, kappa, qk, phi):
    """Goal-tracking cost on the last kappa+1 predicted positions.

    Expresses sum_k qk |p_hat[k] - goal|^2 for k = K-kappa..K as a quadratic
    form in the control points through the stacked prediction (the constant
    term is dropped).
    """
    K = sp.K
    if not 0 <= kappa < K:
        raise ValueError(f"kappa must satisfy 0 <= kappa < K, got {kappa}")
    x0 = np.asarray(x0, float).ravel()
    goal = np.asarray(goal, float).ravel()
    pos_map = sp.Psel @ (sp.Lambda @ phi)
    pos_off = sp.Psel @ (sp.A0 @ x0)
    lo = 3 * (K - kappa - 1)       # predicted positions p_hat[K-kappa..K]
    M = pos_map[lo:]
    r = pos_off[lo:] - np.tile(goal, kappa + 1)
    H = 2.0 * qk * (M.T @ M)
    f = 2.0 * qk * (M.T @ r)
    return H, f


def energy_cost(basis, alphas):
    """Weighted squared-derivative energy, assembled from per-segment Grams."""
    n = basis.n_points
    H = np.zeros((n, n))
    I3 = np.eye(3)
    blk = 3 * (basis.p + 1)
    for c in sorted(alphas):
        a = alphas[c]
        if a < 0:
            raise ValueError("energy weights must be nonnegative")
        if a == 0:
            continue
        for s in range(basis.l):
            G = basis.energy_grams[(s, c)]
            H[s * blk:(s + 1) * blk, s * blk:(s + 1) * blk] += 2.0 * a * np.kron(G, I3)
    return H


def violation_cost(n_slack, zeta, xi):
    """Quadratic plus linear penalty on the nonpositive slack block."""
    if not zeta > 0:
        raise ValueError("quadratic slack weight must be positive")
    H = 2.0 * zeta * np.eye(n_slack)
    f = xi * np.ones(n_slack)
    return H, f


def _collision_rows(collisions, n_points, n_slack, sample_matrix, sample_offset,
                    first_segment_points):
    """Inequality rows for avoidance halfspaces, with slack columns appended.

    A halfspace normal . p >= offset (+ eps) on a plan sample p = R z + r0
    becomes -(normal @ R) z + eps <= normal . r0 - offset.
    """
    n = n_points + n_slack
    rows, rhs = [], []
    slack_id = 0
    for c in collisions:
        if c.sample_index is None:
            for m in range(first_segment_points):
                row = np.zeros(n)
                row[3 * m:3 * m + 3] = -c.normal
                b = -c.offset
                if c.slack:
                    row[n_points + slack_id] = 1.0
                    slack_id += 1
                rows.append(row)
                rhs.append(b)
        else:
            k = c.sample_index
            R = sample_matrix[3 * k:3 * k + 3]
            r0 = sample_offset[3 * k:3 * k + 3] if sample_offset is not None else np.zeros(3)
            row = np.zeros(n)
            row[:n_points] = -(c.normal @ R)
            b = float(c.normal @ r0) - c.offset
            if c.slack:
                row[n_points + slack_id] = 1.0
                slack_id += 1
            rows.append(row)
            rhs.append(b)
    assert slack_id == n_slack
    if rows:
        return np.vstack(rows), np.asarray(rhs)
    return np.zeros((0, n)), np.zeros(0)


def count_slacks(collisions, first_segment_points):
    """Slack variables implied by a constraint list (one per soft row)."""
    n = 0
    for c in collisions:
        if c.slack:
            n += first_segment_points if c.sample_index is None else 1
    return n


def assemble(n_points, point_costs, eq_blocks, ineq_blocks, collisions=(),
             slack_costs=None, sample_matrix=None, sample_offset=None,
             first_segment_points=None):
    """Compose the standard QP from cost pieces and constraint blocks.

    point_costs holds (H, f) pairs on the control-point block; slack_costs the
    (H, f) penalty on the slack block.  Collision halfspaces are mapped onto
    the control-point columns through sample_matrix, and bound rows eps <= 0
    are appended for every slack.
    """
    n_slack = count_slacks(collisions, first_segment_points or 0)
    n = n_points + n_slack

    H = np.zeros((n, n))
    f = np.zeros(n)
    for Hc, fc in point_costs:
        if Hc is not None:
            H[:n_points, :n_points] += Hc
        if fc is not None:
            f[:n_points] += fc
    if n_slack:
        Hs, fs = slack_costs
        if Hs.shape != (n_slack, n_slack):
            raise ValueError("slack cost size does not match the slack count")
        H[n_points:, n_points:] += Hs
        f[n_points:] += fs
    H = 0.5 * (H + H.T)

    eqs = [(np.asarray(A, float), np.asarray(b, float)) for A, b in eq_blocks]
    for A, b in eqs:
        if A.shape[1] != n_points:
            raise ValueError("equality block has the wrong number of columns")
    if eqs:
        Aeq = np.vstack([np.hstack([A, np.zeros((A.shape[0], n_slack))]) for A, _ in eqs])
        beq = np.concatenate([b for _, b in eqs])
    else:
        Aeq, beq = np.zeros((0, n)), np.zeros(0)

    ineqs = []
    for A, b in ineq_blocks:
        A = np.asarray(A, float)
        if A.shape[1] != n_points:
            raise ValueError("inequality block has the wrong number of columns")
        ineqs.append((np.hstack([A, np.zeros((A.shape[0], n_slack))]), np.asarray(b, float)))

    Acoll, bcoll = _collision_rows(collisions, n_points, n_slack,
                                   sample_matrix, sample_offset,
                                   first_segment_points or 0)
    ineqs.append((Acoll, bcoll))
    if n_slack:  # bound rows eps <= 0
        Abnd = np.hstack([np.zeros((n_slack, n_points)), np.eye(n_slack)])
        ineqs.append((Abnd, np.zeros(n_slack)))

    Ain = np.vstack([A for A, _ in ineqs]) if ineqs else np.zeros((0, n))
    bin_ = np.concatenate([b for _, b in ineqs]) if ineqs else np.zeros(0)
    return QpProblem(H=H, f=f, Aeq=Aeq, beq=beq, Ain=Ain, bin=bin_,
                     n_points=n_points, n_slack=n_slack)


def kkt_residual(qp, z, lam, mu):
    """Worst violation of stationarity, feasibility and complementarity."""
    stat = qp.H @ z + qp.f
    if qp.Aeq.size:
        stat = stat + qp.Aeq.T @ lam
    if qp.Ain.size:
        stat = stat + qp.Ain.T @ mu
    parts = [np.abs(stat).max() if stat.size else 0.0]
    if qp.Aeq.size:
        parts.append(np.abs(qp.Aeq @ z - qp.beq).max())
    if qp.Ain.size:
        resid = qp.Ain @ z - qp.bin
        parts.append(max(0.0, resid.max()))
        parts.append(np.abs(mu * resid).max())
        parts.append(max(0.0, -mu.min()) if mu.size else 0.0)
    return float(max(parts))


def _dual_active_set(L, q, C, d, max_iter, initial_active=()):
    """Goldfarb-Idnani dual active-set method for min 1/2 y'Py + q'y, Cy <= d.

    L is the Cholesky factorization pair of the positive definite P (as
    returned by cho_factor).  Starts at the unconstrained optimum and
    activates violated constraints one at a time, taking partial dual steps
    (dropping blocking constraints) until each becomes satisfied.  The
    active-set Gram matrix is maintained incrementally.  Returns
    (y, mu, active, status, iterations).

    initial_active warm-starts the working set; rows whose multipliers come
    out negative at the warm solve are discarded to restore dual feasibility.
    """
    from scipy.linalg import cho_solve

    m = C.shape[0]
    y = cho_solve(L, -q, check_finite=False)
    mu = np.zeros(m)
    if m == 0:
        return y, mu, [], "optimal", 0

    # >= form: n_i' y >= b_i with n_i = -C_i, b_i = -d_i
    N_all = np.ascontiguousarray(-C.T)
    b_all = -d
    feas_tol = 1e-10 * (1.0 + np.abs(d).max())

    n_red = N_all.shape[0]
    max_q = min(n_red + 1, m)
    act = np.empty(max_q, dtype=int)     # active constraint indices
    cols = np.empty((n_red, max_q))      # cho_solve(L, n_k) per active k
    M = np.empty((max_q, max_q))         # active Gram matrix Nact' P^-1 Nact
    nq = 0

    init = [k for k in initial_active if k < m][:max_q]
    if init:
        y0 = y
        while init:
            Nw = N_all[:, init]
            cw = cho_solve(L, Nw, check_finite=False)
            Mw = Nw.T @ cw
            try:
                u = np.linalg.solve(Mw, b_all[init] - Nw.T @ y0)
            except np.linalg.LinAlgError:
                init = []
                break
            if u.min() >= 0.0:
                break
            init = [k for k, uk in zip(init, u) if uk > 0.0]
        if init:
            nq = len(init)
            act[:nq] = init
            cols[:, :nq] = cw[:, :nq] if cw.shape[1] == nq else \
                cho_solve(L, N_all[:, init], check_finite=False)
            M[:nq, :nq] = N_all[:, init].T @ cols[:, :nq]
            u = np.linalg.solve(M[:nq, :nq], b_all[init] - N_all[:, init].T @ y0)
            y = y0 + cols[:, :nq] @ u
            mu[init] = u

    iterations = 0
    p = -1
    u_p = 0.0
    invLn = v_p = None
    while iterations < max_iter:
        iterations += 1
        if p < 0:
            s = N_all.T @ y - b_all
            s[act[:nq]] = 0.0
            worst = int(np.argmin(s))
            if s[worst] >= -feas_tol:
                return y, mu, list(act[:nq]), "optimal", iterations
            p = worst
            u_p = 0.0
            invLn = cho_solve(L, N_all[:, p], check_finite=False)
            v_p = None
        n_plus = N_all[:, p]
        if nq:
            if v_p is None:
                v_p = cols[:, :nq].T @ n_plus
            r_dir = np.linalg.solve(M[:nq, :nq], v_p)
            z_dir = invLn - cols[:, :nq] @ r_dir
        else:
            r_dir = np.zeros(0)
            z_dir = invLn

        # dual blocking step
        t1, k_block = np.inf, -1
        if nq:
            mu_act = mu[act[:nq]]
            blocking = r_dir > 1e-12
            if blocking.any():
                ratios = np.where(blocking, mu_act / np.where(blocking, r_dir, 1.0), np.inf)
                k_block = int(np.argmin(ratios))
                t1 = float(ratios[k_block])
        # full primal step
        denom = n_plus @ z_dir
        if denom > 1e-13:
            t2 = -(n_plus @ y - b_all[p]) / denom
        else:
            t2 = np.inf
        t = min(t1, t2)
        if not np.isfinite(t):
            return y, mu, list(act[:nq]), "infeasible", iterations

        if np.isfinite(t2):
            y = y + t * z_dir
        if nq:
            mu[act[:nq]] -= t * r_dir
        u_p += t
        if t == t2 and np.isfinite(t2):
            mu[p] = u_p
            M[:nq, nq] = v_p if nq else 0.0
            M[nq, :nq] = M[:nq, nq]
            M[nq, nq] = n_plus @ invLn
            cols[:, nq] = invLn
            act[nq] = p
            nq += 1
            p = -1
        else:
            mu[act[k_block]] = 0.0
            keep = np.arange(nq) != k_block
            act[:nq - 1] = act[:nq][keep]
            cols[:, :nq - 1] = cols[:, :nq][:, keep]
            Mk = M[:nq, :nq][np.ix_(keep, keep)]
            M[:nq - 1, :nq - 1] = Mk
            nq -= 1
            v_p = None
    return y, mu, list(act[:nq]), "iteration-limit", iterations


class _Reduction:
    """Null-space elimination of the equality block, cached across solves.

    The planner reuses one equality matrix and one quadratic cost for many
    cycles (only right-hand sides change), so the QR factorization and the
    reduced Cholesky factor are keyed on the matrix bytes and reused.  Slack
    variables never appear in equality rows, so the cache key only involves
    the control-point block and the slack count.
    """

    def __init__(self, H, Aeq):
        from scipy.linalg import cho_factor, qr

        n = H.shape[0]
        meq = Aeq.shape[0]
        if meq:
            Q, R = qr(Aeq.T, mode="full")
            diag = np.abs(np.diag(R[:min(meq, n)]))
            rank = int(np.sum(diag > max(diag.max(), 1.0) * 1e-12)) if diag.size else 0
            self.Z = Q[:, rank:]
            self.pinv = np.linalg.pinv(Aeq)
        else:
            self.Z = np.eye(n)
            self.pinv = None
        P = self.Z.T @ H @ self.Z
        P = 0.5 * (P + P.T)
        jitter = 0.0
        scale = max(np.trace(P) / max(P.shape[0], 1), 1.0)
        self.L = None
        for _ in range(4):
            try:
                if P.shape[0]:
                    self.L = cho_factor(P + jitter * np.eye(P.shape[0]), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = max(jitter * 100.0, 1e-12 * scale)
        else:
            raise np.linalg.LinAlgError("reduced Hessian is not positive definite")
        self.P = P + jitter * np.eye(P.shape[0])


_reduction_cache = {}


def _get_reduction(H, Aeq):
    key = (H.shape[0], Aeq.shape[0], H.tobytes(), Aeq.tobytes())
    red = _reduction_cache.get(key)
    if red is None:
        red = _Reduction(H, Aeq)
        if len(_reduction_cache) > 96:
            _reduction_cache.clear()
        _reduction_cache[key] = red
    return red


def solve(qp, tol=1e-6, max_iter=None):
    """Dense active-set solve of the assembled QP.

    Equality constraints are eliminated through a null-space basis, then the
    reduced strictly convex problem is solved with a dual active-set method.
    Deterministic for identical inputs.
    """
    n = qp.n
    H = qp.H + REGULARIZATION * np.eye(n)
    f = np.asarray(qp.f, float)
    Aeq, beq = np.asarray(qp.Aeq, float), np.asarray(qp.beq, float)
    Ain, bin_ = np.asarray(qp.Ain, float), np.asarray(qp.bin, float)
    m_in = Ain.shape[0]
    meq = Aeq.shape[0]
    if max_iter is None:
        max_iter = 10 * (m_in + n) + 100

    red = _get_reduction(H, Aeq)
    Z = red.Z
    if meq:
        z_part = red.pinv @ beq
        if np.linalg.norm(Aeq @ z_part - beq, np.inf) > 1e-7 * (1.0 + np.abs(beq).max()):
            return QpSolution(z=None, status="infeasible")
    else:
        z_part = np.zeros(n)

    qv = Z.T @ (H @ z_part + f)
    C = Ain @ Z if m_in else np.zeros((0, Z.shape[1]))
    d = bin_ - Ain @ z_part if m_in else np.zeros(0)

    if Z.shape[1] == 0:
        # Fully determined by the equalities; inequalities can only be checked.
        y = np.zeros(0)
        mu = np.zeros(m_in)
        active = []
        viol = (-d).max() if m_in else 0.0
        status = "optimal" if viol <= 1e-9 * (1.0 + np.abs(bin_).max() if m_in else 1.0) \
            else "infeasible"
        iterations = 0
    else:
        # Slack bound rows sit at the tail of Ain and are active whenever the
        # matching collision row is slack-free; warm-starting them skips the
        # one-by-one activation of what is almost always the final set.
        warm = range(m_in - qp.n_slack, m_in) if qp.n_slack else ()
        y, mu, active, status, iterations = _dual_active_set(
            red.L, qv, C, d, max_iter, initial_active=warm)
    if status != "optimal":
        z = z_part + Z @ y if y is not None else None
        return QpSolution(z=z, status=status, iterations=iterations)

    # Polish: exact KKT solve on the final active set.
    if active:
        P = red.P
        nr = P.shape[0]
        Nact = C[active].T
        q_act = len(active)
        K = np.zeros((nr + q_act, nr + q_act))
        K[:nr, :nr] = P
        K[:nr, nr:] = Nact
        K[nr:, :nr] = Nact.T
        rhs = np.concatenate([-qv, d[active]])
        try:
            sol_v = np.linalg.solve(K, rhs)
            y = sol_v[:nr]
            mu = np.zeros(m_in)
            mu[active] = np.maximum(sol_v[nr:], 0.0)
        except np.linalg.LinAlgError:
            pass

    z = z_part + Z @ y
    lam = np.zeros(meq)
    if meq:
        grad = H @ z + f + (Ain.T @ mu if m_in else 0.0)
        lam = red.pinv.T @ -grad
    res = kkt_residual(qp, z, lam, mu)
    obj = float(0.5 * z @ (qp.H @ z) + qp.f @ z)
    status = "optimal" if res <= tol else "iteration-limit"
    return QpSolution(z=z, status=status, objective=obj, kkt_residual=res,
                      eq_multipliers=lam, ineq_multipliers=mu, iterations=iterations)


def solve_timed(qp, tol=1e-6, max_iter=None):
    """solve() wrapped with a monotonic wall-clock measurement in ms."""
    t0 = time.perf_counter()
    sol = solve(qp, tol=tol, max_iter=max_iter)
    return sol, (time.perf_counter() - t0) * 1e3


def dump_problem(qp, path):
    """Plain-text dump of (H, f, Aeq, beq, Ain, bin) for external checking."""
    with open(path, "w") as fh:
        for name, arr in (("H", qp.H), ("f", qp.f), ("Aeq", qp.Aeq),
                          ("beq", qp.beq), ("Ain", qp.Ain), ("bin", qp.bin)):
            fh.write(f"# {name} shape={np.atleast_2d(arr).shape}\n")
            np.savetxt(fh, np.atleast_2d(arr), fmt="%.17g")
