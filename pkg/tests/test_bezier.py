import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import linprog

from swarmplan.bezier import (BezierSpline, bernstein, build_basis,
                              continuity_constraints, de_casteljau,
                              derivative_control_points, energy_gram,
                              eval_segment, initial_condition_constraints,
                              limit_constraints, power_transform)

RNG = np.random.default_rng(2024)


def project_onto_rows(z, A, b):
    """Least-change correction of z so that A z = b (test helper)."""
    r = A @ z - b
    return z - A.T @ np.linalg.solve(A @ A.T, r)


# ---------------------------------------------------------------- bernstein

def test_bernstein_endpoint_interpolation():
    for m in range(6):
        val = bernstein(5, m, 2.0, 0.0)
        assert val == (1.0 if m == 0 else 0.0)


def test_bernstein_midpoint_value():
    assert abs(bernstein(2, 1, 1.0, 0.5) - 0.5) < 1e-15


def test_bernstein_partition_of_unity_and_nonnegativity():
    for _ in range(100):
        p = int(RNG.integers(1, 9))
        T = float(RNG.uniform(0.2, 4.0))
        t = float(RNG.uniform(0.0, T))
        vals = [bernstein(p, m, T, t) for m in range(p + 1)]
        assert min(vals) >= 0.0
        assert abs(sum(vals) - 1.0) < 1e-12


def test_bernstein_domain_errors():
    with pytest.raises(ValueError):
        bernstein(3, 4, 1.0, 0.5)
    with pytest.raises(ValueError):
        bernstein(3, 1, 1.0, 1.5)
    with pytest.raises(ValueError):
        bernstein(3, 1, 1.0, -0.1)


# ------------------------------------------------------------- derivatives

def test_derivative_of_constant_curve_is_zero():
    pts = np.tile([1.0, -2.0, 0.5], (6, 1))
    d = derivative_control_points(pts, 1.5, 1)
    assert np.abs(d).max() == 0.0


def test_linear_curve_slope():
    a, b = np.array([0.0, 1.0, 2.0]), np.array([1.0, 3.0, -2.0])
    d = derivative_control_points(np.vstack([a, b]), 2.0, 1)
    assert np.allclose(d[0], (b - a) / 2.0)


def test_derivative_matches_finite_differences():
    T = 1.3
    pts = RNG.standard_normal((6, 3))
    d = 1e-5
    for t in np.linspace(2 * d, T - 2 * d, 20):
        ana = eval_segment(pts, T, t, deriv=1)
        num = (de_casteljau(pts, T, t + d) - de_casteljau(pts, T, t - d)) / (2 * d)
        assert np.abs(ana - num).max() < 1e-6


def test_derivative_order_error():
    with pytest.raises(ValueError):
        derivative_control_points(np.zeros((3, 3)), 1.0, 3)


# ------------------------------------------------------------- power basis

def test_power_transform_round_trip():
    for p in range(1, 6):
        T = float(RNG.uniform(0.5, 2.0))
        pts = RNG.standard_normal((p + 1, 3))
        M = power_transform(p, T)
        coeffs = M @ pts
        for t in np.linspace(0, T, 10):
            horner = sum(coeffs[j] * t ** j for j in range(p + 1))
            assert np.abs(horner - de_casteljau(pts, T, t)).max() < 1e-9


# ------------------------------------------------------------ energy grams

def test_energy_of_constant_curve():
    G = energy_gram(3, 2.0, 0)
    pts = np.ones(4)
    assert abs(pts @ G @ pts - 2.0) < 1e-12


def test_energy_of_unit_slope():
    # S(t) = t on [0, 1]: integral of S'^2 is 1
    G = energy_gram(3, 1.0, 1)
    pts = np.linspace(0.0, 1.0, 4)
    assert abs(pts @ G @ pts - 1.0) < 1e-12


def test_energy_gram_matches_quadrature():
    for c in (0, 1, 2):
        for p in (3, 5):
            T = float(RNG.uniform(0.5, 2.0))
            pts = RNG.standard_normal((p + 1, 3))
            G = energy_gram(p, T, c)
            closed = sum(pts[:, ax] @ G @ pts[:, ax] for ax in range(3))

            def sq(t):
                v = eval_segment(pts, T, t, deriv=c)
                return float(v @ v)

            ref, _ = quad(sq, 0.0, T, epsabs=1e-13, epsrel=1e-12, limit=200)
            assert abs(closed - ref) < 1e-8 * max(1.0, abs(ref))


def test_energy_gram_symmetric_psd():
    for c in (0, 1, 2):
        G = energy_gram(5, 1.0, c)
        assert np.allclose(G, G.T)
        assert np.linalg.eigvalsh(G).min() > -1e-12


def test_energy_gram_order_error():
    with pytest.raises(ValueError):
        energy_gram(3, 1.0, 4)


# -------------------------------------------------------------- convex hull

def test_sampled_points_inside_control_hull():
    for _ in range(10):
        pts = RNG.standard_normal((6, 3))
        for t in RNG.uniform(0, 1.0, 5):
            x = de_casteljau(pts, 1.0, float(t))
            # feasibility LP: convex weights reproducing the sample
            res = linprog(np.zeros(6), A_eq=np.vstack([pts.T, np.ones(6)]),
                          b_eq=np.concatenate([x, [1.0]]),
                          bounds=[(0, None)] * 6, method="highs")
            assert res.status == 0


# ------------------------------------------------------------ sample matrix

def paper_grid():
    return dict(l=3, p=5, durations=[1.0, 1.0, 1.0], h=0.2, K=16)


def test_basis_shapes_for_reference_grid():
    basis = build_basis(**paper_grid(), max_deriv=2)
    assert basis.sample_matrix.shape == (48, 54)
    assert set(basis.deriv_sample_matrices) == {0, 1, 2}


def test_duration_mismatch_rejected():
    with pytest.raises(ValueError):
        build_basis(3, 5, [1.0, 1.0, 0.5], 0.2, 16, 2)


def test_constant_spline_samples():
    basis = build_basis(**paper_grid(), max_deriv=2)
    q = np.array([0.4, -1.0, 2.0])
    spline = BezierSpline.constant(q, 3, 5, [1.0, 1.0, 1.0])
    samples = (basis.sample_matrix @ spline.points).reshape(16, 3)
    assert np.abs(samples - q).max() < 1e-12
    assert np.abs(basis.deriv_sample_matrices[1] @ spline.points).max() < 1e-9


def test_sample_matrix_cross_checks_hodograph_evaluation():
    # power-basis sampling rows against de Casteljau evaluation of the
    # derivative curves: two independent construction paths
    grid = paper_grid()
    basis = build_basis(**grid, max_deriv=2)
    pts = RNG.standard_normal(54)
    spline = BezierSpline(3, 5, grid["durations"], pts)
    for c in (0, 1, 2):
        samples = (basis.deriv_sample_matrices[c] @ pts).reshape(16, 3)
        for k in range(16):
            t = min(k * grid["h"], 3.0)
            assert np.abs(samples[k] - spline.eval(t, deriv=c)).max() < 1e-9


def test_junction_samples_use_left_segment():
    grid = paper_grid()
    basis = build_basis(**grid, max_deriv=1)
    # t = 1.0 is sample k = 5 and lies exactly on the first junction
    row_block = basis.sample_matrix[15:18]
    assert np.abs(row_block[:, 18:]).max() == 0.0
    assert np.abs(row_block[:, :18]).max() > 0.0


# ------------------------------------------------------------- constraints

def test_continuity_row_counts():
    A, b = continuity_constraints(1, 5, [3.0], 2)
    assert A.shape[0] == 0
    A, b = continuity_constraints(3, 5, [1.0, 1.0, 1.0], 2)
    assert A.shape == (18, 54)
    assert np.abs(b).max() == 0.0


def test_continuity_rows_enforce_junction_smoothness():
    A, b = continuity_constraints(3, 5, [1.0, 1.0, 1.0], 2)
    z = project_onto_rows(RNG.standard_normal(54), A, b)
    spline = BezierSpline(3, 5, [1.0, 1.0, 1.0], z)
    eps = 1e-9
    for junction in (1.0, 2.0):
        for c in (0, 1, 2):
            left = spline.eval(junction - eps, deriv=c)
            right = spline.eval(junction + eps, deriv=c)
            assert np.abs(left - right).max() < 1e-6


def test_initial_condition_pins_value():
    q = np.array([0.3, 0.7, -0.2])
    A, b = initial_condition_constraints([q], 3, 5, [1.0, 1.0, 1.0])
    assert A.shape == (3, 54)
    z = project_onto_rows(RNG.standard_normal(54), A, b)
    assert np.allclose(z[:3], q)


def test_initial_condition_row_count_and_evaluation():
    u0 = [np.array([0.1, 0.2, 0.3]), np.array([0.5, 0.0, -0.5]), np.zeros(3)]
    A, b = initial_condition_constraints(u0, 3, 5, [1.0, 1.0, 1.0])
    assert A.shape[0] == 9
    z = project_onto_rows(RNG.standard_normal(54), A, b)
    spline = BezierSpline(3, 5, [1.0, 1.0, 1.0], z)
    for c in range(3):
        assert np.abs(spline.eval(0.0, deriv=c) - u0[c]).max() < 1e-9


def test_limit_rows_hold_for_centered_constant_spline():
    basis = build_basis(**paper_grid(), max_deriv=2)
    A, b = limit_constraints(basis, 0, [-1.5, -1.5, 0.0], [1.5, 1.5, 2.0])
    assert A.shape == (96, 54)
    spline = BezierSpline.constant([0.0, 0.0, 1.0], 3, 5, [1.0, 1.0, 1.0])
    assert (A @ spline.points <= b + 1e-12).all()
    # acceleration band of +-1 also holds for a constant spline
    A2, b2 = limit_constraints(basis, 2, -np.ones(3), np.ones(3))
    assert (A2 @ spline.points <= b2 + 1e-12).all()


def test_limit_rows_catch_sampled_violations_only():
    # single segment sampled at its two ends: a parabola-like acceleration
    # bump S'' = c t (T - t) vanishes at both samples yet peaks in between
    T = 0.4
    basis = build_basis(1, 5, [T], T, 2, max_deriv=2)
    coeffs = np.zeros((6, 3))
    c_amp = 40.0
    # S''(t) = c t T - c t^2  =>  S(t) = c T t^3 / 6 - c t^4 / 12
    coeffs[3, 0] = c_amp * T / 6.0
    coeffs[4, 0] = -c_amp / 12.0
    M = power_transform(5, T)
    pts = np.linalg.solve(M, coeffs)
    z = pts.ravel()
    A, b = limit_constraints(basis, 2, -np.ones(3), np.ones(3))
    peak = c_amp * (T / 2) ** 2
    assert peak > 1.0
    assert (A @ z <= b + 1e-9).all()   # inter-sample violation goes unseen

    # shifting the bump onto a sampled instant is caught
    coeffs2 = np.zeros((6, 3))
    coeffs2[2, 0] = 1.1 / 2.0          # S'' = 1.1 everywhere, incl. samples
    pts2 = np.linalg.solve(M, coeffs2)
    assert not (A @ pts2.ravel() <= b + 1e-9).all()


def test_limit_bounds_must_be_ordered():
    basis = build_basis(**paper_grid(), max_deriv=2)
    with pytest.raises(ValueError):
        limit_constraints(basis, 0, [1.0, 0.0, 0.0], [-1.0, 1.0, 1.0])


# ------------------------------------------------------------------ spline

def test_spline_validation():
    with pytest.raises(ValueError):
        BezierSpline(2, 5, [1.0, -1.0], np.zeros(36))
    with pytest.raises(ValueError):
        BezierSpline(2, 5, [1.0, 1.0], np.zeros(35))


def test_spline_eval_clamps_tiny_overrun():
    spline = BezierSpline.constant([1.0, 2.0, 3.0], 3, 5, [1.0, 1.0, 1.0])
    assert np.allclose(spline.eval(3.0 + 5e-10), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        spline.eval(3.1)
