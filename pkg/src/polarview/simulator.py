"""Synthetic surround-view scenes: moving objects, ego motion, noisy detections.

A scene holds a camera rig and a list of frames.  Objects move with
constant velocity in the frame-0 (world) plane; each frame stores them in
that frame's ego coordinates together with the ego pose mapping those
coordinates back to frame 0.  All generation is a pure function of
(config, seed).

Noise is applied in polar coordinates by default — radial and
tangential-angle perturbations — matching the parametrization under
test; a cartesian mode (isotropic x/y noise at the radial std) exists for
contrast experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .camera import EgoPose, Rig, make_symmetric_rig, rotation_about_z
from .geometry import (
    CartesianBox,
    CartesianVelocity,
    PolarBox,
    PolarVelocity,
    RangeConfig,
    cartesian_to_polar,
    velocity_cartesian_to_polar,
    wrap_angle,
)

__all__ = [
    "SceneObject",
    "SceneFrame",
    "Scene",
    "Detection",
    "DetectionFrame",
    "DetectionSet",
    "NoiseModel",
    "SceneConfig",
    "generate_scene",
    "rotate_scene",
    "render_detections",
]


@dataclass(frozen=True)
class SceneObject:
    """Ground-truth object in one frame's ego coordinates."""

    object_id: int
    label: int
    box: CartesianBox
    velocity: CartesianVelocity


@dataclass(frozen=True)
class SceneFrame:
    t: float
    ego_pose: EgoPose
    objects: tuple[SceneObject, ...]


@dataclass(frozen=True)
class Scene:
    rig: Rig
    frames: tuple[SceneFrame, ...]

    def __post_init__(self) -> None:
        times = [f.t for f in self.frames]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("Scene: timestamps must strictly increase")
        for frame in self.frames:
            ids = [o.object_id for o in frame.objects]
            if len(set(ids)) != len(ids):
                raise ValueError("Scene: object ids must be unique within a frame")


@dataclass(frozen=True, eq=False)
class Detection:
    """Scored polar-box prediction with class probabilities and polar velocity."""

    box: PolarBox
    probs: np.ndarray
    velocity: PolarVelocity
    score: float

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if not np.isfinite(probs).all() or ((probs < 0.0) | (probs > 1.0)).any():
            raise ValueError("Detection: probs must lie in [0, 1]")
        if not (np.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError("Detection: score must lie in [0, 1]")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def label(self) -> int:
        return int(np.argmax(self.probs))


@dataclass(frozen=True)
class DetectionFrame:
    t: float
    detections: tuple[Detection, ...]


@dataclass(frozen=True)
class DetectionSet:
    frames: tuple[DetectionFrame, ...]


@dataclass(frozen=True)
class NoiseModel:
    """Perturbation model for rendering detections from ground truth.

    Stds: radial (m), tangential angle (rad), z (m), size (relative,
    log-space), yaw (rad), velocity components (m/s).  ``drop_prob``
    removes true objects; ``false_positive_rate`` is the expected number
    of spurious detections per frame (Poisson).  ``mode`` selects polar
    (default) or cartesian position noise.
    """

    radial_std: float = 0.0
    tangential_std: float = 0.0
    z_std: float = 0.0
    size_rel_std: float = 0.0
    yaw_std: float = 0.0
    velocity_std: float = 0.0
    drop_prob: float = 0.0
    false_positive_rate: float = 0.0
    seed: int = 0
    mode: str = "polar"

    def __post_init__(self) -> None:
        stds = (
            self.radial_std,
            self.tangential_std,
            self.z_std,
            self.size_rel_std,
            self.yaw_std,
            self.velocity_std,
            self.false_positive_rate,
        )
        if any(s < 0.0 for s in stds):
            raise ValueError("NoiseModel: stds and rates must be nonnegative")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError("NoiseModel: drop_prob must lie in [0, 1]")
        if self.mode not in ("polar", "cartesian"):
            raise ValueError("NoiseModel: mode must be 'polar' or 'cartesian'")


@dataclass(frozen=True)
class SceneConfig:
    """Scene generation knobs; everything is seed-deterministic."""

    n_objects: int = 5
    n_frames: int = 1
    dt: float = 0.5
    r_max: float = 50.0
    n_classes: int = 4
    speed_min: float = 0.0
    speed_max: float = 8.0
    ego_motion: str = "static"  # static | straight | arc
    ego_speed: float = 5.0
    ego_yaw_rate: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_objects < 0 or self.n_frames < 1 or self.n_classes < 1:
            raise ValueError("SceneConfig: counts out of range")
        if self.dt <= 0.0:
            raise ValueError("SceneConfig: dt must be positive")
        if self.r_max <= 2.0:
            raise ValueError("SceneConfig: r_max must exceed the 2 m placement floor")
        if not 0.0 <= self.speed_min <= self.speed_max:
            raise ValueError("SceneConfig: need 0 <= speed_min <= speed_max")
        if self.ego_motion not in ("static", "straight", "arc"):
            raise ValueError("SceneConfig: unknown ego_motion")


def _ego_state(config: SceneConfig, t: float) -> tuple[float, np.ndarray]:
    """(heading, position) of the ego in frame-0 coordinates at time t."""
    if config.ego_motion == "static":
        return 0.0, np.zeros(3)
    if config.ego_motion == "straight":
        return 0.0, np.array([config.ego_speed * t, 0.0, 0.0])
    omega = config.ego_yaw_rate
    if omega == 0.0:
        return 0.0, np.array([config.ego_speed * t, 0.0, 0.0])
    radius = config.ego_speed / omega
    psi = omega * t
    return psi, np.array([radius * math.sin(psi), radius * (1.0 - math.cos(psi)), 0.0])


def generate_scene(config: SceneConfig, rig: Rig | None = None) -> Scene:
    """Generate a constant-velocity scene; deterministic for a given seed.

    Objects are placed with radial distance uniform in (2, r_max) around
    the ego at frame 0 and keep a constant frame-0 velocity; each frame
    stores their positions, yaws and velocities re-expressed in that
    frame's ego coordinates.
    """
    rng = np.random.default_rng(config.seed)
    if rig is None:
        rig = make_symmetric_rig(6)

    objects0 = []
    for oid in range(config.n_objects):
        r = rng.uniform(2.0, config.r_max)
        a = rng.uniform(-math.pi, math.pi)
        z = rng.uniform(-1.0, 1.0)
        l = rng.uniform(3.0, 5.0)
        w = rng.uniform(1.5, 2.2)
        h = rng.uniform(1.3, 2.0)
        yaw = wrap_angle(rng.uniform(-math.pi, math.pi))
        speed = rng.uniform(config.speed_min, config.speed_max)
        v_dir = rng.uniform(-math.pi, math.pi)
        label = int(rng.integers(0, config.n_classes))
        objects0.append(
            (
                oid,
                label,
                np.array([r * math.cos(a), r * math.sin(a), z]),
                (l, w, h),
                yaw,
                np.array([speed * math.cos(v_dir), speed * math.sin(v_dir)]),
            )
        )

    frames = []
    for n in range(config.n_frames):
        t = n * config.dt
        psi, ego_pos = _ego_state(config, t)
        rz = rotation_about_z(psi)
        pose = EgoPose(rotation=rz, translation=ego_pos, dt=t)
        rz_inv = rz.T
        frame_objects = []
        for oid, label, p0, (l, w, h), yaw, v_world in objects0:
            p_world = p0 + np.array([v_world[0] * t, v_world[1] * t, 0.0])
            p_ego = rz_inv @ (p_world - ego_pos)
            v_ego = rz_inv[:2, :2] @ v_world
            frame_objects.append(
                SceneObject(
                    object_id=oid,
                    label=label,
                    box=CartesianBox(
                        x=float(p_ego[0]),
                        y=float(p_ego[1]),
                        z=float(p_ego[2]),
                        l=l,
                        w=w,
                        h=h,
                        yaw=wrap_angle(yaw - psi),
                    ),
                    velocity=CartesianVelocity(v_x=float(v_ego[0]), v_y=float(v_ego[1])),
                )
            )
        frames.append(SceneFrame(t=t, ego_pose=pose, objects=tuple(frame_objects)))
    return Scene(rig=rig, frames=tuple(frames))


def rotate_scene(scene: Scene, phi: float) -> Scene:
    """Rotate all scene content by ``phi`` about the frame-0 ego z axis.

    Object positions, velocities and yaws rotate within every frame's ego
    coordinates; ego pose translations rotate and pose rotations are
    conjugated (a no-op for planar yaw-only motion).  The rig is
    unchanged, so the rotated scene probes view symmetry.
    """
    rz = rotation_about_z(phi)
    rz2 = rz[:2, :2]
    frames = []
    for frame in scene.frames:
        pose = EgoPose(
            rotation=rz @ frame.ego_pose.rotation @ rz.T,
            translation=rz @ frame.ego_pose.translation,
            dt=frame.ego_pose.dt,
        )
        objects = []
        for obj in frame.objects:
            p = rz @ np.array([obj.box.x, obj.box.y, obj.box.z])
            v = rz2 @ np.array([obj.velocity.v_x, obj.velocity.v_y])
            objects.append(
                replace(
                    obj,
                    box=replace(
                        obj.box,
                        x=float(p[0]),
                        y=float(p[1]),
                        z=float(p[2]),
                        yaw=wrap_angle(obj.box.yaw + phi),
                    ),
                    velocity=CartesianVelocity(v_x=float(v[0]), v_y=float(v[1])),
                )
            )
        frames.append(SceneFrame(t=frame.t, ego_pose=pose, objects=tuple(objects)))
    return Scene(rig=scene.rig, frames=tuple(frames))


def _one_hot(label: int, n_classes: int) -> np.ndarray:
    probs = np.zeros(n_classes)
    probs[label] = 1.0
    return probs


def render_detections(
    scene: Scene,
    noise: NoiseModel,
    range_config: RangeConfig = RangeConfig(),
    n_classes: int | None = None,
) -> DetectionSet:
    """Render a detection set from ground truth under the noise model.

    With all stds, drop probability and false-positive rate at zero the
    detections are the exact polar transforms of the ground truth with
    one-hot class probabilities and score 1.  False positives are placed
    uniformly inside the perception range with score drawn from
    U(0.1, 0.9).
    """
    if n_classes is None:
        labels = [o.label for f in scene.frames for o in f.objects]
        n_classes = max(labels) + 1 if labels else 1
    rng = np.random.default_rng(noise.seed)
    frames = []
    for frame in scene.frames:
        detections = []
        for obj in frame.objects:
            # keep RNG consumption independent of the drop outcome
            dropped = rng.uniform() < noise.drop_prob
            draws = rng.normal(0.0, 1.0, size=9)
            if dropped:
                continue
            polar = cartesian_to_polar(obj.box)
            if noise.mode == "polar":
                r = max(polar.r + draws[0] * noise.radial_std, 1e-6)
                a = math.atan2(polar.sin_a, polar.cos_a) + draws[1] * noise.tangential_std
            else:
                x = obj.box.x + draws[0] * noise.radial_std
                y = obj.box.y + draws[1] * noise.radial_std
                r = max(math.hypot(x, y), 1e-6)
                a = math.atan2(y, x)
            yaw = wrap_angle(obj.box.yaw + draws[6] * noise.yaw_std)
            sin_a, cos_a = math.sin(a), math.cos(a)
            if noise.tangential_std == 0.0 and noise.mode == "polar":
                sin_a, cos_a = polar.sin_a, polar.cos_a  # exact passthrough, no trig roundoff
            v_polar = velocity_cartesian_to_polar(obj.velocity, sin_a, cos_a)
            box = PolarBox(
                r=r,
                sin_a=sin_a,
                cos_a=cos_a,
                z=polar.z + draws[2] * noise.z_std,
                l=polar.l * math.exp(draws[3] * noise.size_rel_std),
                w=polar.w * math.exp(draws[4] * noise.size_rel_std),
                h=polar.h * math.exp(draws[5] * noise.size_rel_std),
                sin_t=math.sin(yaw) if noise.yaw_std > 0.0 else polar.sin_t,
                cos_t=math.cos(yaw) if noise.yaw_std > 0.0 else polar.cos_t,
            )
            velocity = PolarVelocity(
                v_rad=v_polar.v_rad + draws[7] * noise.velocity_std,
                v_tan=v_polar.v_tan + draws[8] * noise.velocity_std,
            )
            detections.append(
                Detection(box=box, probs=_one_hot(obj.label, n_classes), velocity=velocity, score=1.0)
            )
        for _ in range(int(rng.poisson(noise.false_positive_rate))):
            r = rng.uniform(2.0, range_config.r_max)
            a = rng.uniform(-math.pi, math.pi)
            yaw = rng.uniform(-math.pi, math.pi)
            box = PolarBox(
                r=float(r),
                sin_a=math.sin(a),
                cos_a=math.cos(a),
                z=float(rng.uniform(range_config.z_min + 0.1, range_config.z_max - 0.1)),
                l=float(rng.uniform(3.0, 5.0)),
                w=float(rng.uniform(1.5, 2.2)),
                h=float(rng.uniform(1.3, 2.0)),
                sin_t=math.sin(yaw),
                cos_t=math.cos(yaw),
            )
            detections.append(
                Detection(
                    box=box,
                    probs=_one_hot(int(rng.integers(0, n_classes)), n_classes),
                    velocity=PolarVelocity(v_rad=0.0, v_tan=0.0),
                    score=float(rng.uniform(0.1, 0.9)),
                )
            )
        frames.append(DetectionFrame(t=frame.t, detections=tuple(detections)))
    return DetectionSet(frames=tuple(frames))
