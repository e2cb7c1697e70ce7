"""Scene / detection JSON persistence and report writers.

The scene schema (version 1):

    {"schema_version": 1,
     "rig": [{"intrinsics": [fx, fy, cx, cy],
              "extrinsics": {"rotation": [9 floats, row-major],
                             "translation": [3 floats]},
              "image_size": [w, h]}],
     "frames": [{"t": ..., "ego_pose": {"rotation": ..., "translation": ...},
                 "objects": [{"id": ..., "class": ...,
                              "box": [x, y, z, l, w, h, yaw],
                              "velocity": [vx, vy]}]}]}

Detections mirror it with polar boxes [r, sin_a, cos_a, z, l, w, h,
sin_t, cos_t], a score, a class-probability vector and velocity
[v_rad, v_tan].  Floats are emitted with 17 significant digits, which
round-trips float64 exactly and keeps outputs byte-stable.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .camera import CameraModel, EgoPose, Rig
from .geometry import CartesianBox, CartesianVelocity, PolarBox, PolarVelocity
from .simulator import (
    Detection,
    DetectionFrame,
    DetectionSet,
    Scene,
    SceneFrame,
    SceneObject,
)

__all__ = [
    "SCHEMA_VERSION",
    "dumps_json",
    "scene_to_dict",
    "scene_from_dict",
    "detections_to_dict",
    "detections_from_dict",
    "save_scene",
    "load_scene",
    "save_detections",
    "load_detections",
]

SCHEMA_VERSION = 1


def _format_float(x: float) -> str:
    if not np.isfinite(x):
        raise ValueError("cannot serialize non-finite float")
    x = float(x) + 0.0  # canonicalize -0.0
    return format(x, ".17g")


def dumps_json(obj: Any, indent: int = 0) -> str:
    """Serialize to JSON with floats at 17 significant digits.

    The stdlib encoder offers no hook for float formatting, so this is a
    small recursive writer over the plain dict/list/scalar values used by
    the schemas here.
    """
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f"{pad}  {json.dumps(str(k))}: {dumps_json(v, indent + 2)}" for k, v in obj.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps_json(v, indent) for v in obj]
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(items) + "]"
        inner = ",\n".join(pad + "  " + dumps_json(v, indent + 2) for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"unsupported JSON value of type {type(obj)!r}")


def _camera_to_dict(cam: CameraModel) -> dict:
    return {
        "intrinsics": [cam.fx, cam.fy, cam.cx, cam.cy],
        "extrinsics": {
            "rotation": [float(v) for v in cam.rotation.reshape(-1)],
            "translation": [float(v) for v in cam.translation],
        },
        "image_size": [cam.width, cam.height],
    }


def _camera_from_dict(d: dict) -> CameraModel:
    fx, fy, cx, cy = d["intrinsics"]
    return CameraModel(
        fx=fx,
        fy=fy,
        cx=cx,
        cy=cy,
        rotation=np.array(d["extrinsics"]["rotation"], dtype=np.float64).reshape(3, 3),
        translation=np.array(d["extrinsics"]["translation"], dtype=np.float64),
        width=int(d["image_size"][0]),
        height=int(d["image_size"][1]),
    )


def _pose_to_dict(pose: EgoPose) -> dict:
    return {
        "rotation": [float(v) for v in pose.rotation.reshape(-1)],
        "translation": [float(v) for v in pose.translation],
    }


def _pose_from_dict(d: dict, dt: float) -> EgoPose:
    return EgoPose(
        rotation=np.array(d["rotation"], dtype=np.float64).reshape(3, 3),
        translation=np.array(d["translation"], dtype=np.float64),
        dt=dt,
    )


def scene_to_dict(scene: Scene) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "rig": [_camera_to_dict(cam) for cam in scene.rig.cameras],
        "frames": [
            {
                "t": frame.t,
                "ego_pose": _pose_to_dict(frame.ego_pose),
                "objects": [
                    {
                        "id": obj.object_id,
                        "class": obj.label,
                        "box": [
                            obj.box.x,
                            obj.box.y,
                            obj.box.z,
                            obj.box.l,
                            obj.box.w,
                            obj.box.h,
                            obj.box.yaw,
                        ],
                        "velocity": [obj.velocity.v_x, obj.velocity.v_y],
                    }
                    for obj in frame.objects
                ],
            }
            for frame in scene.frames
        ],
    }


def _check_version(d: dict) -> None:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}")


def scene_from_dict(d: dict) -> Scene:
    _check_version(d)
    rig = Rig(tuple(_camera_from_dict(c) for c in d["rig"]))
    frames = []
    for fd in d["frames"]:
        objects = tuple(
            SceneObject(
                object_id=int(od["id"]),
                label=int(od["class"]),
                box=CartesianBox(*[float(v) for v in od["box"]]),
                velocity=CartesianVelocity(*[float(v) for v in od["velocity"]]),
            )
            for od in fd["objects"]
        )
        frames.append(
            SceneFrame(
                t=float(fd["t"]),
                ego_pose=_pose_from_dict(fd["ego_pose"], dt=float(fd["t"])),
                objects=objects,
            )
        )
    return Scene(rig=rig, frames=tuple(frames))


def detections_to_dict(dets: DetectionSet) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "frames": [
            {
                "t": frame.t,
                "detections": [
                    {
                        "box": [float(v) for v in det.box.as_array()],
                        "score": det.score,
                        "probs": [float(p) for p in det.probs],
                        "velocity": [det.velocity.v_rad, det.velocity.v_tan],
                    }
                    for det in frame.detections
                ],
            }
            for frame in dets.frames
        ],
    }


def detections_from_dict(d: dict) -> DetectionSet:
    _check_version(d)
    frames = []
    for fd in d["frames"]:
        detections = tuple(
            Detection(
                box=PolarBox.from_array(dd["box"]),
                probs=np.array(dd["probs"], dtype=np.float64),
                velocity=PolarVelocity(*[float(v) for v in dd["velocity"]]),
                score=float(dd["score"]),
            )
            for dd in fd["detections"]
        )
        frames.append(DetectionFrame(t=float(fd["t"]), detections=detections))
    return DetectionSet(frames=tuple(frames))


def save_scene(scene: Scene, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(scene_to_dict(scene)) + "\n")


def load_scene(path: str) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_from_dict(json.load(fh))


def save_detections(dets: DetectionSet, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(detections_to_dict(dets)) + "\n")


def load_detections(path: str) -> DetectionSet:
    with open(path, "r", encoding="utf-8") as fh:
        return detections_from_dict(json.load(fh))
