"""Bipartite matching loss and analytic gradients through the decode chain.

The loss of a matched (prediction, ground truth) pair is a focal class
term plus L1 terms over the decoded polar box parameters — with the
azimuth pair scaled by ``k_scaling`` — and over the polar velocity
components.  Unmatched predictions contribute only negative-class focal
terms.  :func:`loss_gradient` differentiates the box and velocity terms
through sigmoid / exp / pair normalization analytically; its partner
:func:`finite_difference_gradient` is the independent numerical check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assignment import Assignment
from .geometry import (
    BoxEncoding,
    PolarBox,
    PolarVelocity,
    RangeConfig,
    decode_box_encoding,
)

__all__ = [
    "KinkError",
    "PairLoss",
    "LossBreakdown",
    "PROB_CLAMP",
    "focal_loss",
    "polar_box_l1",
    "velocity_l1",
    "matched_pair_loss",
    "total_matching_loss",
    "loss_gradient",
    "finite_difference_gradient",
    "random_gradient_fixture",
    "GRADIENT_FIELDS",
]

#: Probability clamp applied inside the focal loss.
PROB_CLAMP = 1e-12

#: Order of the partial derivatives returned by the gradient functions.
GRADIENT_FIELDS = (
    "b_r",
    "b_sin_a",
    "b_cos_a",
    "b_z",
    "b_l",
    "b_w",
    "b_h",
    "b_sin_t",
    "b_cos_t",
    "v_rad",
    "v_tan",
)


class KinkError(ValueError):
    """Gradient requested at (or too near) a non-differentiable L1 kink."""


@dataclass(frozen=True)
class PairLoss:
    """Per-matched-pair loss contribution."""

    gt_index: int
    pred_index: int
    class_term: float
    box_term: float
    velocity_term: float


@dataclass(frozen=True)
class LossBreakdown:
    """Loss terms plus the per-matched-ground-truth contributions."""

    class_term: float
    box_term: float
    velocity_term: float
    total: float
    per_gt: tuple[PairLoss, ...] = ()

    def __post_init__(self) -> None:
        parts = self.class_term + self.box_term + self.velocity_term
        if abs(self.total - parts) > 1e-12 * max(1.0, abs(parts)):
            raise ValueError("LossBreakdown: total must equal the sum of its terms")


def focal_loss(prob: float, is_positive: bool, gamma: float = 2.0, alpha_f: float = 0.25) -> float:
    """Focal binary term at predicted probability ``prob`` (clamped to (0, 1))."""
    p = min(max(prob, PROB_CLAMP), 1.0 - PROB_CLAMP)
    if is_positive:
        return -alpha_f * (1.0 - p) ** gamma * math.log(p)
    return -(1.0 - alpha_f) * p**gamma * math.log(1.0 - p)


def polar_box_l1(pred: PolarBox, gt: PolarBox, k_scaling: float) -> float:
    """L1 over polar box parameters with the azimuth pair scaled by k_scaling."""
    return (
        abs(pred.r - gt.r)
        + k_scaling * (abs(pred.sin_a - gt.sin_a) + abs(pred.cos_a - gt.cos_a))
        + abs(pred.z - gt.z)
        + abs(pred.l - gt.l)
        + abs(pred.w - gt.w)
        + abs(pred.h - gt.h)
        + abs(pred.sin_t - gt.sin_t)
        + abs(pred.cos_t - gt.cos_t)
    )


def velocity_l1(pred: PolarVelocity, gt: PolarVelocity) -> float:
    """L1 over the radial and tangential velocity components."""
    return abs(pred.v_rad - gt.v_rad) + abs(pred.v_tan - gt.v_tan)


def _class_loss_for_pred(
    probs: np.ndarray, positive_class: int | None, gamma: float, alpha_f: float
) -> float:
    total = 0.0
    for c, p in enumerate(np.asarray(probs, dtype=np.float64)):
        total += focal_loss(float(p), is_positive=(c == positive_class), gamma=gamma, alpha_f=alpha_f)
    return total


def matched_pair_loss(
    enc: BoxEncoding,
    velocity: PolarVelocity,
    gt_box: PolarBox,
    gt_velocity: PolarVelocity,
    range_config: RangeConfig,
) -> float:
    """Box + velocity loss of one matched pair (decodes the encoding first)."""
    pred = decode_box_encoding(enc, range_config)
    return polar_box_l1(pred, gt_box, range_config.k_scaling) + velocity_l1(velocity, gt_velocity)


def total_matching_loss(
    preds: Sequence[tuple[BoxEncoding, np.ndarray, PolarVelocity]],
    gts: Sequence[tuple[PolarBox, int, PolarVelocity]],
    assignment: Assignment,
    range_config: RangeConfig,
    gamma: float = 2.0,
    alpha_f: float = 0.25,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> LossBreakdown:
    """Sum the class / box / velocity terms over an assignment.

    ``weights`` scales (class, box, velocity).  Matched predictions take
    a positive focal term on the ground-truth class and negative terms on
    the rest; unmatched predictions take negative terms on every class.
    """
    w_cls, w_box, w_vel = weights
    matched_pred = {i: j for j, i in assignment.pairs}
    for j, i in assignment.pairs:
        if not (0 <= j < len(gts) and 0 <= i < len(preds)):
            raise ValueError("total_matching_loss: assignment index out of range")

    class_term = 0.0
    box_term = 0.0
    velocity_term = 0.0
    per_gt = []
    for i, (enc, probs, velocity) in enumerate(preds):
        j = matched_pred.get(i)
        if j is None:
            class_term += w_cls * _class_loss_for_pred(probs, None, gamma, alpha_f)
            continue
        gt_box, gt_label, gt_velocity = gts[j]
        pair_cls = w_cls * _class_loss_for_pred(probs, gt_label, gamma, alpha_f)
        pred_box = decode_box_encoding(enc, range_config)
        pair_box = w_box * polar_box_l1(pred_box, gt_box, range_config.k_scaling)
        pair_vel = w_vel * velocity_l1(velocity, gt_velocity)
        class_term += pair_cls
        box_term += pair_box
        velocity_term += pair_vel
        per_gt.append(
            PairLoss(
                gt_index=j,
                pred_index=i,
                class_term=pair_cls,
                box_term=pair_box,
                velocity_term=pair_vel,
            )
        )
    per_gt.sort(key=lambda pl: pl.gt_index)
    return LossBreakdown(
        class_term=class_term,
        box_term=box_term,
        velocity_term=velocity_term,
        total=class_term + box_term + velocity_term,
        per_gt=tuple(per_gt),
    )


def _sign(x: float) -> float:
    return 1.0 if x > 0.0 else -1.0


def loss_gradient(
    enc: BoxEncoding,
    velocity: PolarVelocity,
    gt_box: PolarBox,
    gt_velocity: PolarVelocity,
    range_config: RangeConfig,
    kink_tol: float = 1e-7,
) -> np.ndarray:
    """Analytic gradient of :func:`matched_pair_loss` w.r.t. the 11 raw inputs.

    Component order follows :data:`GRADIENT_FIELDS`.  Raises
    :class:`KinkError` when any matched coordinate sits within
    ``kink_tol`` of its target, where the L1 subgradient is ambiguous.
    The class term does not depend on these inputs and drops out.
    """
    rc = range_config
    pred = decode_box_encoding(enc, rc)
    deltas = pred.as_array() - gt_box.as_array()
    residuals = np.concatenate(
        [deltas, [velocity.v_rad - gt_velocity.v_rad, velocity.v_tan - gt_velocity.v_tan]]
    )
    near = np.abs(residuals) < kink_tol
    if near.any():
        fields = [GRADIENT_FIELDS[k] for k in np.flatnonzero(near)]
        raise KinkError(f"L1 kink within {kink_tol} on: {', '.join(fields)}")

    k = rc.k_scaling
    grad = np.empty(11)

    s_r = 1.0 / (1.0 + math.exp(-enc.b_r)) if enc.b_r >= 0 else math.exp(enc.b_r) / (1.0 + math.exp(enc.b_r))
    grad[0] = _sign(deltas[0]) * s_r * (1.0 - s_r) * rc.r_max

    # normalized-pair Jacobian: d(u/n)/du = w^2/n^3, d(u/n)/dw = -u*w/n^3
    u, w = enc.b_sin_a, enc.b_cos_a
    n3 = math.hypot(u, w) ** 3
    sgn_s, sgn_c = _sign(deltas[1]), _sign(deltas[2])
    grad[1] = k * (sgn_s * w * w - sgn_c * u * w) / n3
    grad[2] = k * (-sgn_s * u * w + sgn_c * u * u) / n3

    s_z = 1.0 / (1.0 + math.exp(-enc.b_z)) if enc.b_z >= 0 else math.exp(enc.b_z) / (1.0 + math.exp(enc.b_z))
    grad[3] = _sign(deltas[3]) * s_z * (1.0 - s_z) * (rc.z_max - rc.z_min)

    grad[4] = _sign(deltas[4]) * math.exp(enc.b_l)
    grad[5] = _sign(deltas[5]) * math.exp(enc.b_w)
    grad[6] = _sign(deltas[6]) * math.exp(enc.b_h)

    u, w = enc.b_sin_t, enc.b_cos_t
    n3 = math.hypot(u, w) ** 3
    sgn_s, sgn_c = _sign(deltas[7]), _sign(deltas[8])
    grad[7] = (sgn_s * w * w - sgn_c * u * w) / n3
    grad[8] = (-sgn_s * u * w + sgn_c * u * u) / n3

    grad[9] = _sign(residuals[9])
    grad[10] = _sign(residuals[10])
    return grad


def finite_difference_gradient(
    enc: BoxEncoding,
    velocity: PolarVelocity,
    gt_box: PolarBox,
    gt_velocity: PolarVelocity,
    range_config: RangeConfig,
    step: float = 1e-6,
) -> np.ndarray:
    """Central finite differences of :func:`matched_pair_loss` (the oracle)."""
    x0 = np.concatenate([enc.as_array(), [velocity.v_rad, velocity.v_tan]])

    def value(x: np.ndarray) -> float:
        return matched_pair_loss(
            BoxEncoding.from_array(x[:9]),
            PolarVelocity(v_rad=float(x[9]), v_tan=float(x[10])),
            gt_box,
            gt_velocity,
            range_config,
        )

    grad = np.empty(11)
    for i in range(11):
        hi = x0.copy()
        lo = x0.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (value(hi) - value(lo)) / (2.0 * step)
    return grad


def random_gradient_fixture(
    rng: np.random.Generator, range_config: RangeConfig, kink_tol: float = 1e-7
):
    """Draw a random non-kink (encoding, velocity, gt box, gt velocity) tuple.

    Redraws until every matched coordinate clears the kink tolerance with
    a wide margin, so both the analytic gradient and its finite-difference
    check are well defined.
    """
    for _ in range(1000):
        enc = BoxEncoding.from_array(rng.normal(0.0, 1.5, size=9))
        velocity = PolarVelocity(*rng.normal(0.0, 3.0, size=2))
        gt_angles = rng.uniform(-math.pi, math.pi, size=2)
        gt_box = PolarBox(
            r=float(rng.uniform(1.0, range_config.r_max - 1.0)),
            sin_a=math.sin(gt_angles[0]),
            cos_a=math.cos(gt_angles[0]),
            z=float(rng.uniform(range_config.z_min + 0.2, range_config.z_max - 0.2)),
            l=float(rng.uniform(0.5, 6.0)),
            w=float(rng.uniform(0.5, 3.0)),
            h=float(rng.uniform(0.5, 3.0)),
            sin_t=math.sin(gt_angles[1]),
            cos_t=math.cos(gt_angles[1]),
        )
        gt_velocity = PolarVelocity(*rng.normal(0.0, 3.0, size=2))
        try:
            loss_gradient(enc, velocity, gt_box, gt_velocity, range_config, kink_tol=100 * kink_tol)
        except KinkError:
            continue
        return enc, velocity, gt_box, gt_velocity
    raise RuntimeError("could not draw a non-kink gradient fixture")
