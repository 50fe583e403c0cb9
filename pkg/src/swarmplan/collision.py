"""Ellipsoid-scaled distances, buffered-cell and on-demand avoidance constraints.

All pairwise geometry is measured with a scaled norm |Theta^-1 (pi - pj)|,
which turns the usual sphere into an ellipsoid (taller exclusion zones along
z for rotorcraft downwash).  Static obstacles enter as synthetic neighbours
carrying their own scaling.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateGeometryError, StalePredictionError


@dataclass
class EllipsoidSpec:
    """Safety ellipsoid: scaling diagonal theta and minimum scaled distance."""

    theta: np.ndarray
    r_min: float

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).ravel()
        if self.theta.shape != (3,) or np.any(self.theta <= 0):
            raise ValueError("theta must be 3 positive entries")
        if not self.r_min > 0:
            raise ValueError("r_min must be positive")


def combine_specs(a, b):
    """Pairwise spec for mixed ellipsoids: elementwise max theta, max r_min."""
    if b is None:
        return a
    return EllipsoidSpec(np.maximum(a.theta, b.theta), max(a.r_min, b.r_min))


def scaled_distance(e, pi, pj):
    """|Theta^-1 (pi - pj)|_2."""
    d = (np.asarray(pi, float) - np.asarray(pj, float)) / e.theta
    return float(np.linalg.norm(d))


@dataclass
class HorizonPrediction:
    """One agent's shared horizon: predicted positions and reference inputs.

    positions[k] and inputs[k] refer to time k planning steps after the cycle
    stamp; positions[0] is the measured position.  Static obstacles use
    stamp None (always current) and carry their own ellipsoid.
    """

    agent_id: int
    positions: np.ndarray  # (K, 3)
    inputs: np.ndarray     # (K, 3)
    stamp: Optional[int]
    ellipsoid: Optional[EllipsoidSpec] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.positions.shape != self.inputs.shape or self.positions.ndim != 2:
            raise ValueError("positions and inputs must both be (K, 3)")
        if not (np.isfinite(self.positions).all() and np.isfinite(self.inputs).all()):
            raise ValueError("predictions must be finite")

    def series(self, space):
        if space == "state":
            return self.positions
        if space == "input":
            return self.inputs
        raise ValueError(f"unknown space {space!r}")


@dataclass
class HalfspaceConstraint:
    """Linear avoidance constraint normal . p >= offset (+ slack if soft).

    sample_index selects the horizon sample of the new plan the row binds;
    None marks a buffered-cell constraint on all first-segment control points.
    """

    normal: np.ndarray
    offset: float
    neighbor_id: int
    sample_index: Optional[int] = None
    slack: bool = False

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float).ravel()
        if np.linalg.norm(self.normal) == 0.0:
            raise DegenerateGeometryError("zero constraint normal")


def _check_pair(mine, theirs):
    if mine.positions.shape != theirs.positions.shape:
        raise ValueError("predictions must share the horizon length")
    if mine.stamp is not None and theirs.stamp is not None and mine.stamp != theirs.stamp:
        raise StalePredictionError(
            f"prediction stamps differ: {mine.stamp} vs {theirs.stamp}")


def detect_first_collision(mine, theirs, e, space="state"):
    """Smallest horizon index k in 1..K-1 with scaled distance < r_min, else None.

    Index 0 is the committed current sample and cannot be replanned.
    """
    _check_pair(mine, theirs)
    a, b = mine.series(space), theirs.series(space)
    for k in range(1, a.shape[0]):
        if scaled_distance(e, a[k], b[k]) < e.r_min:
            return k
    return None


def min_distance_index(mine, theirs, e, space="state"):
    """(min scaled distance, argmin index) over horizon samples 1..K-1."""
    _check_pair(mine, theirs)
    a, b = mine.series(space), theirs.series(space)
    diffs = (a[1:] - b[1:]) / e.theta
    dists = np.linalg.norm(diffs, axis=1)
    k = int(np.argmin(dists))
    return float(dists[k]), k + 1


def neighbor_set(mine, others, e, space="state"):
    """Ids whose horizon comes within 2 r_min scaled distance (the set Omega)."""
    out = []
    for other in others:
        if other.agent_id == mine.agent_id:
            continue
        pair = combine_specs(e, other.ellipsoid)
        xi, _ = min_distance_index(mine, other, pair, space)
        if xi < 2.0 * pair.r_min:
            out.append(other.agent_id)
    return out


def bvc_halfspace(p_i, p_j, e, neighbor_id, slack=False):
    """Buffered Voronoi cell face against one neighbour.

    Points p with normal . (p - p_i) >= (r_min - d_ij) / 2 are kept; the rule
    binds every control point of the plan's first segment.
    """
    p_i = np.asarray(p_i, float)
    p_j = np.asarray(p_j, float)
    d = scaled_distance(e, p_i, p_j)
    if d == 0.0:
        raise DegenerateGeometryError(f"coincident positions with neighbour {neighbor_id}")
    normal = (p_i - p_j) / e.theta ** 2 / d
    offset = float(normal @ p_i) + (e.r_min - d) / 2.0
    return HalfspaceConstraint(normal=normal, offset=offset,
                               neighbor_id=neighbor_id, sample_index=None,
                               slack=slack)


def bvc_constraints(p_i, neighbors, e, slack=False):
    """Buffered-cell halfspaces against a list of measured neighbour positions."""
    return [bvc_halfspace(p_i, p_j, e, j, slack=slack)
            for j, p_j in enumerate(neighbors)]


def ondemand_constraint(p0_i, pj, e, sample_index, neighbor_id):
    """First-order avoidance constraint linearized about the previous plan.

    Linearizes f(p) = |Theta^-1 (p - pj)| about p0_i; since f is convex the
    halfspace normal . (p - p0_i) >= r_min - d underestimates f and is safe.
    The row is relaxed by a nonpositive slack variable.
    """
    p0_i = np.asarray(p0_i, float)
    pj = np.asarray(pj, float)
    d = scaled_distance(e, p0_i, pj)
    if d == 0.0:
        raise DegenerateGeometryError(f"coincident prediction with neighbour {neighbor_id}")
    normal = (p0_i - pj) / e.theta ** 2 / d
    offset = float(normal @ p0_i) + (e.r_min - d)
    return HalfspaceConstraint(normal=normal, offset=offset,
                               neighbor_id=neighbor_id, sample_index=sample_index,
                               slack=True)


def obstacle_as_neighbor(center, e, K, agent_id):
    """Static obstacle wrapped as a constant horizon prediction."""
    center = np.asarray(center, float)
    block = np.tile(center, (K, 1))
    return HorizonPrediction(agent_id=agent_id, positions=block.copy(),
                             inputs=block.copy(), stamp=None, ellipsoid=e)
