"""Bernstein-basis spline machinery for piecewise Bezier reference inputs.

A reference input is l concatenated Bezier curves of degree p in R^3; the
control points are the optimization variables.  This module provides

* basis evaluation and stable de Casteljau curve evaluation,
* hodograph (derivative control point) relations,
* exact sampling matrices mapping control points to input samples and
  their derivatives on the planning grid (built through the power basis),
* equality rows for junction continuity and initial conditions,
* inequality rows for derivative limits at the sample instants,
* closed-form Gram matrices of squared-derivative energy.

Control point vectors are laid out segment-major, then point, then axis:
[seg0 P0x P0y P0z, seg0 P1x ... seg(l-1) Pp z], total length 3 l (p+1).
"""

from dataclasses import dataclass
from math import comb

import numpy as np

_I3 = np.eye(3)


def bernstein(p, m, T, t):
    """Bernstein polynomial value C(p,m) (1-t/T)^(p-m) (t/T)^m."""
    if not (0 <= m <= p):
        raise ValueError(f"index m={m} outside 0..{p}")
    if T <= 0:
        raise ValueError("duration T must be positive")
    if not (0 <= t <= T):
        raise ValueError(f"t={t} outside [0, {T}]")
    tau = t / T
    return comb(p, m) * (1.0 - tau) ** (p - m) * tau ** m


def diff_matrix(p, T):
    """Map degree-p control points to first-derivative control points."""
    D = np.zeros((p, p + 1))
    for m in range(p):
        D[m, m] = -p / T
        D[m, m + 1] = p / T
    return D


def hodograph_matrix(p, T, c):
    """Map degree-p control points to the order-c derivative's control points."""
    if c > p:
        raise ValueError(f"derivative order {c} exceeds degree {p}")
    M = np.eye(p + 1)
    for k in range(c):
        M = diff_matrix(p - k, T) @ M
    return M


def derivative_control_points(points, T, c):
    """Control points of the c-th derivative curve (degree p-c).

    Iterates the first-derivative rule P'_m = (p/T)(P_{m+1} - P_m).
    """
    points = np.atleast_2d(np.asarray(points, float))
    p = points.shape[0] - 1
    if c > p:
        raise ValueError(f"derivative order {c} exceeds degree {p}")
    return hodograph_matrix(p, T, c) @ points


def de_casteljau(points, T, t):
    """Numerically stable evaluation of a Bezier segment at time t in [0, T]."""
    b = np.array(points, dtype=float)
    tau = t / T
    n = b.shape[0]
    for r in range(1, n):
        b[:n - r] = (1.0 - tau) * b[:n - r] + tau * b[1:n - r + 1]
    return b[0]


def eval_segment(points, T, t, deriv=0):
    """Evaluate a segment or one of its derivatives at time t."""
    pts = np.atleast_2d(np.asarray(points, float))
    if deriv:
        p = pts.shape[0] - 1
        if deriv > p:
            return np.zeros(pts.shape[1])
        pts = derivative_control_points(pts, T, deriv)
    return de_casteljau(pts, T, t)


def power_transform(p, T):
    """Matrix M with (power coefficients) = M @ (control points), per axis.

    Exact for polynomials of degree <= p: S(t) = sum_j coeffs[j] t^j.
    """
    M = np.zeros((p + 1, p + 1))
    for j in range(p + 1):
        for m in range(j + 1):
            M[j, m] = (-1.0) ** (j - m) * comb(p, j) * comb(j, m)
        M[j] /= T ** j
    return M


def _monomial_deriv_row(p, t, c):
    """Row w with w @ coeffs = (d^c/dt^c) sum_j coeffs[j] t^j."""
    w = np.zeros(p + 1)
    for j in range(c, p + 1):
        fac = 1.0
        for i in range(c):
            fac *= j - i
        w[j] = fac * t ** (j - c)
    return w


def energy_gram(p, T, c):
    """Gram matrix G with points' G points = integral of |S^(c)(t)|^2 over [0,T].

    Uses the closed-form Bernstein product integral
    int_0^T S_{m,q} S_{n,q} dt = T C(q,m) C(q,n) / ((2q+1) C(2q, m+n)).
    """
    if c > p:
        raise ValueError(f"derivative order {c} exceeds degree {p}")
    D = hodograph_matrix(p, T, c)
    q = p - c
    G0 = np.zeros((q + 1, q + 1))
    for m in range(q + 1):
        for n in range(q + 1):
            G0[m, n] = T * comb(q, m) * comb(q, n) / ((2 * q + 1) * comb(2 * q, m + n))
    G = D.T @ G0 @ D
    return 0.5 * (G + G.T)


def _segment_of(durations, t, tol=1e-9):
    """Segment index and local time for global time t; junctions go left."""
    ends = np.cumsum(durations)
    total = ends[-1]
    if t > total:
        if t - total > tol:
            raise ValueError(f"t={t} beyond spline duration {total}")
        t = total
    if t < 0:
        if t < -tol:
            raise ValueError(f"t={t} negative")
        t = 0.0
    s = int(np.searchsorted(ends, t, side="left"))
    s = min(s, len(durations) - 1)
    start = ends[s] - durations[s]
    return s, min(t - start, durations[s])


@dataclass
class SplineBasis:
    """Precomputed sampling and energy structure for an l-segment spline."""

    l: int
    p: int
    durations: np.ndarray
    h: float
    K: int
    sample_matrix: np.ndarray            # (3K, 3l(p+1)), order-0 samples
    deriv_sample_matrices: dict          # order c -> (3K, 3l(p+1))
    power_transforms: list               # per segment, (p+1, p+1)
    energy_grams: dict                   # (segment, order) -> (p+1, p+1)

    @property
    def n_points(self):
        return 3 * self.l * (self.p + 1)


def build_basis(l, p, durations, h, K, max_deriv=2):
    """Sampling matrices for the planning grid t = 0, h, ..., (K-1)h.

    Rows are built through the power basis, so samples are exact values of
    the spline and its derivatives.  Samples landing on an interior junction
    are assigned to the left segment.
    """
    durations = np.asarray(durations, dtype=float)
    if durations.ndim != 1 or len(durations) != l:
        raise ValueError("durations must list one duration per segment")
    if np.any(durations <= 0):
        raise ValueError("segment durations must be positive")
    if abs(durations.sum() - (K - 1) * h) > 1e-9:
        raise ValueError(
            f"durations sum {durations.sum()} != horizon span {(K - 1) * h}")
    if max_deriv > p:
        raise ValueError(f"max_deriv {max_deriv} exceeds degree {p}")

    n_pts = 3 * l * (p + 1)
    transforms = [power_transform(p, T) for T in durations]
    mats = {c: np.zeros((3 * K, n_pts)) for c in range(max_deriv + 1)}
    for k in range(K):
        s, tau = _segment_of(durations, k * h)
        base = s * 3 * (p + 1)
        for c in range(max_deriv + 1):
            row = _monomial_deriv_row(p, tau, c) @ transforms[s]
            mats[c][3 * k:3 * k + 3, base:base + 3 * (p + 1)] = np.kron(row, _I3)

    grams = {(s, c): energy_gram(p, durations[s], c)
             for s in range(l) for c in range(max_deriv + 1)}
    return SplineBasis(l=l, p=p, durations=durations, h=h, K=K,
                       sample_matrix=mats[0], deriv_sample_matrices=mats,
                       power_transforms=transforms, energy_grams=grams)


def _endpoint_row(p, T, c, end):
    """Row giving the order-c derivative value at a segment start or end."""
    M = hodograph_matrix(p, T, c)
    return M[-1] if end else M[0]


def continuity_constraints(l, p, durations, cont_order):
    """Equality rows forcing derivative continuity at the l-1 junctions."""
    if cont_order > p:
        raise ValueError(f"continuity order {cont_order} exceeds degree {p}")
    durations = np.asarray(durations, dtype=float)
    n_pts = 3 * l * (p + 1)
    n_rows = 3 * (l - 1) * (cont_order + 1)
    A = np.zeros((n_rows, n_pts))
    r = 0
    for s in range(l - 1):
        for c in range(cont_order + 1):
            left = _endpoint_row(p, durations[s], c, end=True)
            right = _endpoint_row(p, durations[s + 1], c, end=False)
            A[r:r + 3, s * 3 * (p + 1):(s + 1) * 3 * (p + 1)] = np.kron(left, _I3)
            A[r:r + 3, (s + 1) * 3 * (p + 1):(s + 2) * 3 * (p + 1)] = np.kron(-right, _I3)
            r += 3
    return A, np.zeros(n_rows)


def initial_condition_constraints(u0, l, p, durations):
    """Equality rows pinning the spline value and derivatives at t = 0.

    u0 is a sequence of 3-vectors, one per derivative order starting at 0.
    """
    u0 = np.atleast_2d(np.asarray(u0, float))
    if u0.shape[0] > p + 1:
        raise ValueError("more pinned derivative orders than the degree supports")
    durations = np.asarray(durations, dtype=float)
    n_pts = 3 * l * (p + 1)
    A = np.zeros((3 * u0.shape[0], n_pts))
    b = np.zeros(3 * u0.shape[0])
    for c in range(u0.shape[0]):
        row = _endpoint_row(p, durations[0], c, end=False)
        A[3 * c:3 * c + 3, :3 * (p + 1)] = np.kron(row, _I3)
        b[3 * c:3 * c + 3] = u0[c]
    return A, b


def limit_constraints(basis, c, lo, hi):
    """Inequality rows lo <= (order-c samples) <= hi at every grid instant.

    For c = 0 the bounds are the workspace box.  Limits hold only at the K
    sample instants; excursions between samples are not excluded.
    """
    lo = np.broadcast_to(np.asarray(lo, float), (3,))
    hi = np.broadcast_to(np.asarray(hi, float), (3,))
    if np.any(lo >= hi):
        raise ValueError("lower bounds must be below upper bounds")
    Phi_c = basis.deriv_sample_matrices[c]
    A = np.vstack([Phi_c, -Phi_c])
    b = np.concatenate([np.tile(hi, basis.K), np.tile(-lo, basis.K)])
    return A, b


@dataclass
class BezierSpline:
    """l concatenated degree-p Bezier curves in R^3."""

    l: int
    p: int
    durations: np.ndarray
    points: np.ndarray  # flat, length 3 l (p+1)

    def __post_init__(self):
        self.durations = np.asarray(self.durations, dtype=float)
        self.points = np.asarray(self.points, dtype=float).ravel()
        if np.any(self.durations <= 0):
            raise ValueError("segment durations must be positive")
        if self.points.size != 3 * self.l * (self.p + 1):
            raise ValueError(
                f"expected {3 * self.l * (self.p + 1)} point entries, got {self.points.size}")

    @classmethod
    def constant(cls, value, l, p, durations):
        pts = np.tile(np.asarray(value, float), l * (p + 1))
        return cls(l=l, p=p, durations=durations, points=pts)

    @property
    def total_duration(self):
        return float(self.durations.sum())

    def segment_points(self, s):
        """Control points of segment s as a (p+1, 3) array."""
        n = 3 * (self.p + 1)
        return self.points[s * n:(s + 1) * n].reshape(self.p + 1, 3)

    def eval(self, t, deriv=0):
        """Value (or derivative) at global time t; junction samples go left."""
        s, tau = _segment_of(self.durations, t)
        return eval_segment(self.segment_points(s), self.durations[s], tau, deriv)

    def sample(self, times, deriv=0):
        return np.array([self.eval(t, deriv) for t in np.atleast_1d(times)])
