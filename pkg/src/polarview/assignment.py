"""Polar matching cost, perception-range filtering and optimal assignment.

The pairwise cost between a prediction and a ground-truth box combines a
class term with the polar box term

    |r - r_gt| + k_scaling * (|sin_a - sin_a_gt| + |cos_a - cos_a_gt|)

which deliberately uses only the radial distance and the azimuth pair.
``k_scaling`` (default 20) rescales the tangential terms so the radial
coordinate — up to 50 m against a pair bounded by [-1, 1] — cannot
dominate the assignment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _kernels
from .geometry import CartesianBox, PolarBox

__all__ = [
    "CircularRange",
    "RectangularRange",
    "Assignment",
    "filter_perception_range",
    "box_cost",
    "class_cost",
    "build_cost_matrix",
    "hungarian",
    "brute_force_assign",
    "scaling_ambiguity_fixture",
    "range_ambiguity_fixture",
]

_BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class CircularRange:
    """Keep objects with planar distance <= r_max from the ego origin."""

    r_max: float

    def __post_init__(self) -> None:
        if not self.r_max > 0.0:
            raise ValueError("CircularRange: r_max must be positive")

    def contains(self, x: float, y: float) -> bool:
        return math.hypot(x, y) <= self.r_max


@dataclass(frozen=True)
class RectangularRange:
    """Keep objects with |x| < x_max and |y| < y_max (strict)."""

    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_max > 0.0 and self.y_max > 0.0):
            raise ValueError("RectangularRange: bounds must be positive")

    def contains(self, x: float, y: float) -> bool:
        return abs(x) < self.x_max and abs(y) < self.y_max


def filter_perception_range(
    boxes: Sequence[CartesianBox], region
) -> tuple[list[CartesianBox], list[CartesianBox]]:
    """Split ground-truth boxes into (kept, dropped) by the range region."""
    kept, dropped = [], []
    for box in boxes:
        (kept if region.contains(box.x, box.y) else dropped).append(box)
    return kept, dropped


def box_cost(pred: PolarBox, gt: PolarBox, k_scaling: float) -> float:
    """Radial + scaled-azimuth L1 distance between two polar boxes."""
    return abs(pred.r - gt.r) + k_scaling * (
        abs(pred.sin_a - gt.sin_a) + abs(pred.cos_a - gt.cos_a)
    )


def class_cost(
    pred_class_probs: np.ndarray,
    gt_class: int,
    form: str = "negative_prob",
    gamma: float = 2.0,
    alpha_f: float = 0.25,
) -> float:
    """Class term of the matching cost.

    ``negative_prob`` (default) is -p_hat(gt_class); ``focal`` is the
    focal-style variant (positive minus negative focal weight at the
    predicted probability).
    """
    probs = np.asarray(pred_class_probs, dtype=np.float64)
    if ((probs < 0.0) | (probs > 1.0)).any() or not np.isfinite(probs).all():
        raise ValueError("class_cost: probabilities must lie in [0, 1]")
    p = float(probs[gt_class])
    if form == "negative_prob":
        return -p
    if form == "focal":
        eps = 1e-8
        pos = alpha_f * (1.0 - p) ** gamma * (-math.log(p + eps))
        neg = (1.0 - alpha_f) * p**gamma * (-math.log(1.0 - p + eps))
        return pos - neg
    raise ValueError(f"class_cost: unknown form {form!r}")


def build_cost_matrix(
    preds: Sequence[tuple[PolarBox, np.ndarray]],
    gts: Sequence[tuple[PolarBox, int]],
    k_scaling: float,
    class_cost_form: str = "negative_prob",
) -> np.ndarray:
    """(M, N) cost matrix: rows are ground truths, columns predictions."""
    m, n = len(gts), len(preds)
    if m == 0 or n == 0:
        return np.zeros((m, n))
    gt_rsc = np.array([[b.r, b.sin_a, b.cos_a] for b, _ in gts])
    pred_rsc = np.array([[b.r, b.sin_a, b.cos_a] for b, _ in preds])
    costs = _kernels.polar_cost_matrix(gt_rsc, pred_rsc, k_scaling)
    cls = np.empty((m, n))
    for j, (_, label) in enumerate(gts):
        for i, (_, probs) in enumerate(preds):
            cls[j, i] = class_cost(probs, label, form=class_cost_form)
    return costs + cls


@dataclass(frozen=True)
class Assignment:
    """One-to-one (gt index, prediction index) pairs, injective both ways."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        pairs = tuple((int(j), int(i)) for j, i in self.pairs)
        gt_idx = [j for j, _ in pairs]
        pred_idx = [i for _, i in pairs]
        if len(set(gt_idx)) != len(gt_idx) or len(set(pred_idx)) != len(pred_idx):
            raise ValueError("Assignment: indices must not repeat")
        if any(j < 0 for j in gt_idx) or any(i < 0 for i in pred_idx):
            raise ValueError("Assignment: indices must be nonnegative")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def total_cost(self, costs: np.ndarray) -> float:
        return float(sum(costs[j, i] for j, i in self.pairs))

    def matched_preds(self) -> set[int]:
        return {i for _, i in self.pairs}

    def matched_gts(self) -> set[int]:
        return {j for j, _ in self.pairs}


def _validated_matrix(costs: np.ndarray) -> np.ndarray:
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if costs.size and not np.isfinite(costs).all():
        raise ValueError("cost matrix must be finite")
    return costs


def hungarian(costs: np.ndarray) -> Assignment:
    """Minimum-cost assignment of size min(M, N); rectangular matrices allowed."""
    costs = _validated_matrix(costs)
    if min(costs.shape) == 0:
        return Assignment(())
    rows, cols = linear_sum_assignment(costs)
    return Assignment(tuple(zip(rows.tolist(), cols.tolist())))


def brute_force_assign(costs: np.ndarray) -> Assignment:
    """Exhaustive assignment oracle for matrices with min(M, N) <= 8."""
    costs = _validated_matrix(costs)
    m, n = costs.shape
    if min(m, n) == 0:
        return Assignment(())
    if min(m, n) > _BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute_force_assign: min(M, N) must be <= {_BRUTE_FORCE_LIMIT}")
    best_pairs = None
    best_total = math.inf
    if m <= n:
        for cols in itertools.permutations(range(n), m):
            total = sum(costs[j, i] for j, i in enumerate(cols))
            if total < best_total:
                best_total = total
                best_pairs = tuple(enumerate(cols))
    else:
        for rows in itertools.permutations(range(m), n):
            total = sum(costs[j, i] for i, j in enumerate(rows))
            if total < best_total:
                best_total = total
                best_pairs = tuple(sorted((j, i) for i, j in enumerate(rows)))
    return Assignment(best_pairs)


def _polar(r: float, azimuth: float) -> PolarBox:
    return PolarBox(
        r=r,
        sin_a=math.sin(azimuth),
        cos_a=math.cos(azimuth),
        z=0.0,
        l=4.0,
        w=2.0,
        h=1.5,
        sin_t=0.0,
        cos_t=1.0,
    )


def scaling_ambiguity_fixture() -> tuple[list[tuple[PolarBox, int]], list[tuple[PolarBox, np.ndarray]]]:
    """Deterministic 2-GT / 2-prediction case where k_scaling flips the argmin.

    Two ground truths sit 10 degrees apart in azimuth at nearly equal
    radial distance (30 m and 31 m).  Each prediction has exactly the
    azimuth of one ground truth but sits 1 m off radially — at the
    *other* ground truth's radius.  At k_scaling=1 the radial term
    dominates and both predictions match the azimuth-far ground truth;
    at k_scaling=20 both match their azimuth-near one.

    Returns (gts, preds) in the shapes :func:`build_cost_matrix` takes;
    all classes identical so only the box term discriminates.
    """
    a1 = 0.0
    a2 = math.radians(10.0)
    gts = [(_polar(30.0, a1), 0), (_polar(31.0, a2), 0)]
    probs = np.array([1.0])
    preds = [(_polar(31.0, a1), probs), (_polar(30.0, a2), probs)]
    return gts, preds


def range_ambiguity_fixture() -> tuple[list[CartesianBox], CircularRange, RectangularRange]:
    """Equal-radial-distance pair split by a rectangular range but not a circular one.

    Both objects sit exactly 48 m from the ego: one straight ahead at
    (48, 0), one on the diagonal at 48/sqrt(2) * (1, 1).  A 35 x 50
    rectangle drops the axial object (|x| >= 35) yet keeps the diagonal
    one; the circular 50 m range keeps both.
    """
    d = 48.0 / math.sqrt(2.0)
    objects = [
        CartesianBox(x=48.0, y=0.0, z=0.0, l=4.0, w=2.0, h=1.5, yaw=0.0),
        CartesianBox(x=d, y=d, z=0.0, l=4.0, w=2.0, h=1.5, yaw=0.0),
    ]
    return objects, CircularRange(r_max=50.0), RectangularRange(x_max=35.0, y_max=50.0)
