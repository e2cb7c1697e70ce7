"""Polar box parametrization and conversions between representations.

Frame conventions used throughout the package:

* Ego frame: right-handed, x forward, y left, z up.
* Azimuth ``a``: angle of the object center around the ego origin,
  measured from +x counter-clockwise.  Stored only as a (sin, cos) pair;
  the same applies to the yaw ``t``.  Raw angles appear only in
  explicit diagnostic accessors (:meth:`PolarBox.azimuth`,
  :meth:`PolarBox.yaw`) and in :class:`CartesianBox`.
* Yaw is the object heading in the ego frame (not relative to the radial
  direction); this is a documented convention choice.

A raw network-style encoding maps to a polar box through
:func:`decode_box_encoding`: sigmoid squashes the radial and height
channels into the perception range, size channels go through exp, and the
angle pairs are L2-normalized.  :func:`encode_polar_box` is the exact
inverse on the open interior of the range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "RangeError",
    "RangeConfig",
    "BoxEncoding",
    "PolarBox",
    "CartesianBox",
    "CartesianVelocity",
    "PolarVelocity",
    "decode_box_encoding",
    "decode_boxes",
    "encode_polar_box",
    "encode_boxes",
    "cartesian_to_polar",
    "polar_to_cartesian",
    "velocity_cartesian_to_polar",
    "velocity_polar_to_cartesian",
    "wrap_angle",
    "POLAR_FIELDS",
    "ENCODING_FIELDS",
]

#: Field order shared by array representations of boxes and encodings.
POLAR_FIELDS = ("r", "sin_a", "cos_a", "z", "l", "w", "h", "sin_t", "cos_t")
ENCODING_FIELDS = tuple("b_" + f for f in POLAR_FIELDS)

#: Bound on sigmoid pre-images in lenient encoding mode.
SIGMOID_CLAMP = 15.0

_PAIR_TOL = 1e-9


class RangeError(ValueError):
    """Value sits on or outside the invertible range of an encoding."""


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name}: non-finite component {v!r}")


def _require_unit_pair(name: str, s: float, c: float, tol: float = _PAIR_TOL) -> None:
    if abs(s * s + c * c - 1.0) > tol:
        raise ValueError(f"{name}: ({s}, {c}) is not a unit (sin, cos) pair")


@dataclass(frozen=True)
class RangeConfig:
    """Perception-range bounds and the azimuth scaling factor.

    ``r_max`` is the circular perception radius (50 m by default, the
    nuScenes setting), ``z_min``/``z_max`` bound the decoded height, and
    ``k_scaling`` multiplies azimuth terms in costs and losses so that
    tangential errors are commensurate with radial ones (default 20, the
    best ablation setting).
    """

    r_max: float = 50.0
    z_min: float = -5.0
    z_max: float = 3.0
    k_scaling: float = 20.0

    def __post_init__(self) -> None:
        _require_finite("RangeConfig", self.r_max, self.z_min, self.z_max, self.k_scaling)
        if self.r_max <= 0.0:
            raise ValueError("r_max must be positive")
        if self.z_max <= self.z_min:
            raise ValueError("z_max must exceed z_min")
        if self.k_scaling < 1.0:
            raise ValueError("k_scaling must be >= 1")


@dataclass(frozen=True)
class BoxEncoding:
    """Raw pre-activation 9-tuple produced by a regression head."""

    b_r: float
    b_sin_a: float
    b_cos_a: float
    b_z: float
    b_l: float
    b_w: float
    b_h: float
    b_sin_t: float
    b_cos_t: float

    def __post_init__(self) -> None:
        _require_finite("BoxEncoding", *self.as_array())
        if self.b_sin_a == 0.0 and self.b_cos_a == 0.0:
            raise ValueError("BoxEncoding: azimuth pair must not be (0, 0)")
        if self.b_sin_t == 0.0 and self.b_cos_t == 0.0:
            raise ValueError("BoxEncoding: yaw pair must not be (0, 0)")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.b_r,
                self.b_sin_a,
                self.b_cos_a,
                self.b_z,
                self.b_l,
                self.b_w,
                self.b_h,
                self.b_sin_t,
                self.b_cos_t,
            ]
        )

    @classmethod
    def from_array(cls, values) -> "BoxEncoding":
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class PolarBox:
    """3D box in polar parametrization: (r, sin_a, cos_a, z, l, w, h, sin_t, cos_t)."""

    r: float
    sin_a: float
    cos_a: float
    z: float
    l: float
    w: float
    h: float
    sin_t: float
    cos_t: float

    def __post_init__(self) -> None:
        _require_finite("PolarBox", *self.as_array())
        if self.r < 0.0:
            raise ValueError("PolarBox: r must be >= 0")
        _require_unit_pair("PolarBox azimuth", self.sin_a, self.cos_a)
        _require_unit_pair("PolarBox yaw", self.sin_t, self.cos_t)
        if min(self.l, self.w, self.h) <= 0.0:
            raise ValueError("PolarBox: sizes must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.r,
                self.sin_a,
                self.cos_a,
                self.z,
                self.l,
                self.w,
                self.h,
                self.sin_t,
                self.cos_t,
            ]
        )

    @classmethod
    def from_array(cls, values) -> "PolarBox":
        return cls(*(float(v) for v in values))

    def center_xy(self) -> tuple[float, float]:
        return self.r * self.cos_a, self.r * self.sin_a

    def center_xyz(self) -> np.ndarray:
        x, y = self.center_xy()
        return np.array([x, y, self.z])

    def azimuth(self) -> float:
        """Diagnostic raw azimuth in (-pi, pi]."""
        return wrap_angle(math.atan2(self.sin_a, self.cos_a))

    def yaw(self) -> float:
        """Diagnostic raw yaw in (-pi, pi]."""
        return wrap_angle(math.atan2(self.sin_t, self.cos_t))


@dataclass(frozen=True)
class CartesianBox:
    """3D box with a cartesian center and raw yaw in (-pi, pi]."""

    x: float
    y: float
    z: float
    l: float
    w: float
    h: float
    yaw: float

    def __post_init__(self) -> None:
        _require_finite("CartesianBox", self.x, self.y, self.z, self.l, self.w, self.h, self.yaw)
        if min(self.l, self.w, self.h) <= 0.0:
            raise ValueError("CartesianBox: sizes must be positive")
        if not (-math.pi < self.yaw <= math.pi):
            raise ValueError("CartesianBox: yaw must lie in (-pi, pi]")


@dataclass(frozen=True)
class CartesianVelocity:
    """Planar velocity (m/s) along the ego x/y axes."""

    v_x: float
    v_y: float

    def __post_init__(self) -> None:
        _require_finite("CartesianVelocity", self.v_x, self.v_y)

    def norm(self) -> float:
        return math.hypot(self.v_x, self.v_y)


@dataclass(frozen=True)
class PolarVelocity:
    """Planar velocity (m/s) decomposed along/against the ego-to-object ray.

    Positive ``v_rad`` moves away from the ego; positive ``v_tan`` moves
    counter-clockwise (increasing azimuth) seen from +z.
    """

    v_rad: float
    v_tan: float

    def __post_init__(self) -> None:
        _require_finite("PolarVelocity", self.v_rad, self.v_tan)

    def norm(self) -> float:
        return math.hypot(self.v_rad, self.v_tan)


def decode_box_encoding(enc: BoxEncoding, range_config: RangeConfig) -> PolarBox:
    """Decode a raw encoding into a valid polar box.

    r = sigmoid(b_r) * r_max, z = sigmoid(b_z) * (z_max - z_min) + z_min,
    sizes are exp of their channels and both angle pairs are
    L2-normalized.
    """
    rc = range_config
    na = math.hypot(enc.b_sin_a, enc.b_cos_a)
    nt = math.hypot(enc.b_sin_t, enc.b_cos_t)
    return PolarBox(
        r=_sigmoid(enc.b_r) * rc.r_max,
        sin_a=enc.b_sin_a / na,
        cos_a=enc.b_cos_a / na,
        z=_sigmoid(enc.b_z) * (rc.z_max - rc.z_min) + rc.z_min,
        l=math.exp(enc.b_l),
        w=math.exp(enc.b_w),
        h=math.exp(enc.b_h),
        sin_t=enc.b_sin_t / nt,
        cos_t=enc.b_cos_t / nt,
    )


def decode_boxes(encodings: np.ndarray, range_config: RangeConfig) -> np.ndarray:
    """Vectorized decode of an (N, 9) encoding array (hot kernel)."""
    encodings = np.asarray(encodings, dtype=np.float64)
    if encodings.ndim != 2 or encodings.shape[1] != 9:
        raise ValueError("encodings must have shape (N, 9)")
    if not np.isfinite(encodings).all():
        raise ValueError("encodings must be finite")
    return _kernels.decode_boxes(
        encodings, range_config.r_max, range_config.z_min, range_config.z_max
    )


def _pre_image(value: float, lo: float, hi: float, name: str, lenient: bool) -> float:
    if lenient:
        if value <= lo:
            return -SIGMOID_CLAMP
        if value >= hi:
            return SIGMOID_CLAMP
        return min(max(_logit((value - lo) / (hi - lo)), -SIGMOID_CLAMP), SIGMOID_CLAMP)
    if not (lo < value < hi):
        raise RangeError(f"{name}={value} outside open interval ({lo}, {hi})")
    return _logit((value - lo) / (hi - lo))


def encode_polar_box(box: PolarBox, range_config: RangeConfig, lenient: bool = False) -> BoxEncoding:
    """Invert :func:`decode_box_encoding` on the open range interior.

    Boundary or exterior r/z raise :class:`RangeError`; with
    ``lenient=True`` the sigmoid pre-images are clamped to +-15 instead
    (fixture generation only — clamping silently hides range errors).
    """
    rc = range_config
    return BoxEncoding(
        b_r=_pre_image(box.r, 0.0, rc.r_max, "r", lenient),
        b_sin_a=box.sin_a,
        b_cos_a=box.cos_a,
        b_z=_pre_image(box.z, rc.z_min, rc.z_max, "z", lenient),
        b_l=math.log(box.l),
        b_w=math.log(box.w),
        b_h=math.log(box.h),
        b_sin_t=box.sin_t,
        b_cos_t=box.cos_t,
    )


def encode_boxes(boxes: np.ndarray, range_config: RangeConfig) -> np.ndarray:
    """Vectorized strict inverse of :func:`decode_boxes` for (N, 9) arrays."""
    boxes = np.asarray(boxes, dtype=np.float64)
    if boxes.ndim != 2 or boxes.shape[1] != 9:
        raise ValueError("boxes must have shape (N, 9)")
    rc = range_config
    p_r = boxes[:, 0] / rc.r_max
    p_z = (boxes[:, 3] - rc.z_min) / (rc.z_max - rc.z_min)
    if ((p_r <= 0.0) | (p_r >= 1.0)).any() or ((p_z <= 0.0) | (p_z >= 1.0)).any():
        raise RangeError("r or z on/outside the open perception range")
    out = np.empty_like(boxes)
    out[:, 0] = np.log(p_r / (1.0 - p_r))
    out[:, 3] = np.log(p_z / (1.0 - p_z))
    out[:, 1] = boxes[:, 1]
    out[:, 2] = boxes[:, 2]
    out[:, 4:7] = np.log(boxes[:, 4:7])
    out[:, 7] = boxes[:, 7]
    out[:, 8] = boxes[:, 8]
    return out


def cartesian_to_polar(box: CartesianBox) -> PolarBox:
    """Transform a cartesian box into the polar parametrization.

    Raises ValueError for a center on the ego vertical axis, where the
    azimuth is degenerate.
    """
    r = math.hypot(box.x, box.y)
    if r == 0.0:
        raise ValueError("cartesian_to_polar: degenerate azimuth at (x, y) = (0, 0)")
    return PolarBox(
        r=r,
        sin_a=box.y / r,
        cos_a=box.x / r,
        z=box.z,
        l=box.l,
        w=box.w,
        h=box.h,
        sin_t=math.sin(box.yaw),
        cos_t=math.cos(box.yaw),
    )


def polar_to_cartesian(box: PolarBox) -> CartesianBox:
    """Exact inverse of :func:`cartesian_to_polar` for r > 0."""
    return CartesianBox(
        x=box.r * box.cos_a,
        y=box.r * box.sin_a,
        z=box.z,
        l=box.l,
        w=box.w,
        h=box.h,
        yaw=wrap_angle(math.atan2(box.sin_t, box.cos_t)),
    )


def velocity_cartesian_to_polar(v: CartesianVelocity, sin_a: float, cos_a: float) -> PolarVelocity:
    """Rotate a planar velocity into radial/tangential components at azimuth (sin_a, cos_a)."""
    _require_unit_pair("velocity azimuth", sin_a, cos_a)
    return PolarVelocity(
        v_rad=v.v_x * cos_a + v.v_y * sin_a,
        v_tan=-v.v_x * sin_a + v.v_y * cos_a,
    )


def velocity_polar_to_cartesian(v: PolarVelocity, sin_a: float, cos_a: float) -> CartesianVelocity:
    """Inverse of :func:`velocity_cartesian_to_polar` (same azimuth pair)."""
    _require_unit_pair("velocity azimuth", sin_a, cos_a)
    return CartesianVelocity(
        v_x=v.v_rad * cos_a - v.v_tan * sin_a,
        v_y=v.v_rad * sin_a + v.v_tan * cos_a,
    )


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]; -pi maps to +pi."""
    if not math.isfinite(a):
        raise ValueError("wrap_angle: non-finite angle")
    if -math.pi < a <= math.pi:  # exact passthrough, no roundoff
        return a
    m = (a + math.pi) % (2.0 * math.pi)
    if m == 0.0:
        return math.pi
    return m - math.pi
