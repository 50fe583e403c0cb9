"""Discrete trajectory-tracking models and stacked horizon prediction matrices.

An agent is a closed-loop position tracker: the input u is a position
reference, the state x = (p, v) holds position and velocity, and
x[k+1] = A x[k] + B u[k] advances one planning step of h seconds.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm


@dataclass
class LinearAgentModel:
    """Discrete second-order tracking dynamics, x = (p, v) in R^6, u in R^3."""

    A: np.ndarray
    B: np.ndarray
    h: float

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        if self.A.shape != (6, 6):
            raise ValueError(f"A must be 6x6, got {self.A.shape}")
        if self.B.shape != (6, 3):
            raise ValueError(f"B must be 6x3, got {self.B.shape}")
        if not (np.isfinite(self.A).all() and np.isfinite(self.B).all()):
            raise ValueError("model matrices must be finite")
        if not self.h > 0:
            raise ValueError("step duration h must be positive")

    def step(self, x, u):
        """One discrete step."""
        return self.A @ np.asarray(x, float) + self.B @ np.asarray(u, float)


@dataclass
class StackedPrediction:
    """Horizon form X = A0 x0 + Lambda U of K model iterations.

    X stacks the predicted states x_hat[1..K]; U stacks inputs u_hat[0..K-1]
    (the state at k=0 is measured, not predicted).  Psel selects the position
    rows of each predicted state.
    """

    K: int
    A0: np.ndarray      # (6K, 6)
    Lambda: np.ndarray  # (6K, 3K), lower block triangular
    Psel: np.ndarray    # (3K, 6K)


def make_second_order_model(omega_n, damping, h):
    """Exact zero-order-hold discretization of per-axis tracking dynamics.

    Each axis obeys p'' = omega_n^2 (u - p) - 2 damping omega_n p', the
    three axes are decoupled and identical.
    """
    if not (omega_n > 0 and damping > 0 and h > 0):
        raise ValueError("omega_n, damping and h must all be positive")
    # Augmented per-axis system (p, v, u) with u held constant over the step.
    aug = np.array([
        [0.0, 1.0, 0.0],
        [-omega_n ** 2, -2.0 * damping * omega_n, omega_n ** 2],
        [0.0, 0.0, 0.0],
    ])
    M = expm(aug * h)
    a, b = M[:2, :2], M[:2, 2]

    I3 = np.eye(3)
    A = np.block([[a[0, 0] * I3, a[0, 1] * I3],
                  [a[1, 0] * I3, a[1, 1] * I3]])
    B = np.vstack([b[0] * I3, b[1] * I3])
    return LinearAgentModel(A, B, h)


def build_stacked(model, K):
    """Stack K iterations of the prediction model into matrix form."""
    if K < 2:
        raise ValueError("horizon K must be at least 2")
    A, B = model.A, model.B
    powers = [np.eye(6)]
    for _ in range(K):
        powers.append(A @ powers[-1])

    A0 = np.vstack([powers[k + 1] for k in range(K)])
    Lambda = np.zeros((6 * K, 3 * K))
    for r in range(K):
        for c in range(r + 1):
            Lambda[6 * r:6 * r + 6, 3 * c:3 * c + 3] = powers[r - c] @ B

    Psel = np.zeros((3 * K, 6 * K))
    for k in range(K):
        Psel[3 * k:3 * k + 3, 6 * k:6 * k + 3] = np.eye(3)
    return StackedPrediction(K=K, A0=A0, Lambda=Lambda, Psel=Psel)


def predict_states(sp, x0, U):
    """Predicted state sequence X for measured state x0 and input sequence U."""
    x0 = np.asarray(x0, float).ravel()
    U = np.asarray(U, float).ravel()
    if x0.shape != (6,):
        raise ValueError(f"x0 must have 6 entries, got {x0.shape}")
    if U.shape != (3 * sp.K,):
        raise ValueError(f"U must have {3 * sp.K} entries, got {U.shape}")
    return sp.A0 @ x0 + sp.Lambda @ U


def predicted_positions(sp, x0, U):
    """Position samples p_hat[1..K] of the predicted state sequence."""
    return sp.Psel @ predict_states(sp, x0, U)
