"""Batch command-line surface for reproducible experiments.

Subcommands: simulate, render, assign, track, eval, symmetry-check,
range-demo, gradcheck, nds.  Exit codes: 0 success, 1 validation error
(including bad flags), 2 I/O error.  Identical argv plus identical input
files produce byte-identical outputs: every random draw is seeded and
floats are serialized at fixed precision.

Each subcommand accepts ``--config FILE`` with a JSON object whose keys
mirror the flag names (dashes or underscores); config values override
flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import assignment, loss, metrics, serialization, tracker
from .camera import make_symmetric_rig, max_rotation_discrepancy
from .geometry import (
    RangeConfig,
    cartesian_to_polar,
    velocity_cartesian_to_polar,
)
from .simulator import NoiseModel, Scene, SceneConfig, generate_scene, render_detections

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on bad flags."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    with open(args.config, "r", encoding="utf-8") as fh:
        overrides = json.load(fh)
    if not isinstance(overrides, dict):
        raise ValueError("--config file must hold a JSON object")
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("config", "func"):
            raise ValueError(f"--config: unknown key {key!r}")
        setattr(args, attr, value)
    return args


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    config = SceneConfig(
        n_objects=args.objects,
        n_frames=args.frames,
        dt=args.dt,
        r_max=args.r_max,
        n_classes=args.classes,
        speed_min=args.speed_min,
        speed_max=args.speed_max,
        ego_motion=args.ego,
        ego_speed=args.ego_speed,
        ego_yaw_rate=args.ego_yaw_rate,
        seed=args.seed,
    )
    rig = make_symmetric_rig(args.cameras) if args.cameras >= 2 else None
    scene = generate_scene(config, rig=rig)
    serialization.save_scene(scene, args.out)
    return 0


def _cmd_render(args) -> int:
    scene = serialization.load_scene(args.scene)
    noise = NoiseModel(
        radial_std=args.radial_std,
        tangential_std=args.tangential_std,
        z_std=args.z_std,
        size_rel_std=args.size_std,
        yaw_std=args.yaw_std,
        velocity_std=args.velocity_std,
        drop_prob=args.drop_prob,
        false_positive_rate=args.fp_rate,
        seed=args.seed,
        mode=args.noise_frame,
    )
    dets = render_detections(scene, noise, RangeConfig(r_max=args.r_max))
    serialization.save_detections(dets, args.out)
    return 0


def _region_from_args(args):
    if args.range_mode == "circular":
        return assignment.CircularRange(r_max=args.r_max)
    if args.range_mode == "rectangular":
        return assignment.RectangularRange(x_max=args.x_max, y_max=args.y_max)
    return None


def _cmd_assign(args) -> int:
    scene = serialization.load_scene(args.scene)
    dets = serialization.load_detections(args.detections)
    if len(scene.frames) != len(dets.frames):
        raise ValueError("assign: scene and detections disagree on frame count")
    region = _region_from_args(args)
    frames_out = []
    for frame_gt, frame_det in zip(scene.frames, dets.frames):
        objects = list(frame_gt.objects)
        if region is not None:
            objects = [o for o in objects if region.contains(o.box.x, o.box.y)]
        gts = [(cartesian_to_polar(o.box), o.label) for o in objects]
        preds = [(d.box, d.probs) for d in frame_det.detections]
        costs = assignment.build_cost_matrix(
            preds, gts, args.k_scaling, class_cost_form=args.class_cost
        )
        result = assignment.hungarian(costs)
        pairs = []
        for j, i in result.pairs:
            pairs.append(
                {
                    "gt": j,
                    "gt_id": objects[j].object_id,
                    "pred": i,
                    "cost": float(costs[j, i]),
                    "class_cost": assignment.class_cost(
                        preds[i][1], gts[j][1], form=args.class_cost
                    ),
                    "box_cost": assignment.box_cost(preds[i][0], gts[j][0], args.k_scaling),
                }
            )
        frames_out.append(
            {
                "t": frame_gt.t,
                "pairs": pairs,
                "unmatched_gts": sorted(set(range(len(gts))) - result.matched_gts()),
                "unmatched_preds": sorted(set(range(len(preds))) - result.matched_preds()),
            }
        )
    report = {
        "schema_version": serialization.SCHEMA_VERSION,
        "k_scaling": args.k_scaling,
        "frames": frames_out,
    }
    _write_text(args.out, serialization.dumps_json(report) + "\n")
    return 0


def _cmd_track(args) -> int:
    dets = serialization.load_detections(args.detections)
    config = tracker.TrackerConfig(
        distance_threshold=args.threshold,
        max_misses=args.max_misses,
        matching=args.matching,
    )
    result = tracker.run_tracker(dets, config)
    summary = {"tracks_created": result.tracks_created}
    if args.scene:
        scene = serialization.load_scene(args.scene)
        summary["id_switches"] = tracker.count_id_switches(result, scene)
    frames_out = []
    for n, (frame, out) in enumerate(zip(dets.frames, result.frames)):
        frames_out.append(
            {
                "frame": n,
                "t": frame.t,
                "detections": [
                    {
                        "track_id": tid,
                        "box": [float(v) for v in det.box.as_array()],
                        "score": det.score,
                        "velocity": [det.velocity.v_rad, det.velocity.v_tan],
                    }
                    for tid, det in out
                ],
            }
        )
    report = {
        "schema_version": serialization.SCHEMA_VERSION,
        "frames": frames_out,
        "summary": summary,
    }
    _write_text(args.out, serialization.dumps_json(report) + "\n")
    return 0


def _eval_metrics(scene: Scene, dets, args) -> dict:
    region = _region_from_args(args)
    frame_preds = []
    frame_gts = []
    tp_pairs = []
    for frame_gt, frame_det in zip(scene.frames, dets.frames):
        objects = list(frame_gt.objects)
        if region is not None:
            objects = [o for o in objects if region.contains(o.box.x, o.box.y)]
        gt_centers = [np.array([o.box.x, o.box.y]) for o in objects]
        preds = [
            (np.array(d.box.center_xy()), d.score)
            for d in frame_det.detections
            if region is None or region.contains(*d.box.center_xy())
        ]
        kept_dets = [
            d
            for d in frame_det.detections
            if region is None or region.contains(*d.box.center_xy())
        ]
        frame_preds.append(preds)
        frame_gts.append(gt_centers)
        if preds and gt_centers:
            matches, _ = metrics.match_by_center_distance(
                np.array([c for c, _ in preds]),
                np.array([s for _, s in preds]),
                np.array(gt_centers),
                args.tp_threshold,
            )
            for pi, gi in matches:
                det = kept_dets[pi]
                obj = objects[gi]
                gt_polar = cartesian_to_polar(obj.box)
                gt_vel = velocity_cartesian_to_polar(
                    obj.velocity, gt_polar.sin_a, gt_polar.cos_a
                )
                tp_pairs.append(((det.box, det.velocity), (gt_polar, gt_vel)))

    thresholds = [float(t) for t in args.thresholds.split(",")]
    ap = {
        f"{th:g}": metrics.average_precision_frames(frame_preds, frame_gts, th)
        for th in thresholds
    }
    values = list(ap.values())
    m_ap = None if any(v is None for v in values) else float(np.mean(values))
    report: dict = {
        "ap": ap,
        "map": m_ap,
        "tp_threshold": args.tp_threshold,
        "matched_pairs": len(tp_pairs),
    }
    if tp_pairs:
        errors = metrics.tp_errors(tp_pairs)
        report["tp_errors"] = {
            "ate": errors.ate,
            "ase": errors.ase,
            "aoe": errors.aoe,
            "ave": errors.ave,
        }
        if m_ap is not None:
            report["maae"] = args.maae
            report["nds"] = metrics.nds(
                m_ap, [errors.ate, errors.ase, errors.aoe, errors.ave, args.maae]
            )
    return report


def _load_detections_or_tracks(path: str):
    """Accept a detections JSON or the `track` subcommand's output."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    entries = [d for f in data.get("frames", []) for d in f.get("detections", [])]
    if not any("track_id" in d for d in entries):
        return serialization.detections_from_dict(data)
    from .geometry import PolarBox, PolarVelocity
    from .simulator import Detection, DetectionFrame, DetectionSet

    frames = []
    for fd in data["frames"]:
        frames.append(
            DetectionFrame(
                t=float(fd["t"]),
                detections=tuple(
                    Detection(
                        box=PolarBox.from_array(dd["box"]),
                        probs=np.array([1.0]),
                        velocity=PolarVelocity(*[float(v) for v in dd["velocity"]]),
                        score=float(dd["score"]),
                    )
                    for dd in fd["detections"]
                ),
            )
        )
    return DetectionSet(frames=tuple(frames))


def _cmd_eval(args) -> int:
    scene = serialization.load_scene(args.scene)
    dets = _load_detections_or_tracks(args.detections)
    if len(scene.frames) != len(dets.frames):
        raise ValueError("eval: scene and detections disagree on frame count")
    report = _eval_metrics(scene, dets, args)
    if args.format == "json":
        _write_text(args.out, serialization.dumps_json(report) + "\n")
    else:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["metric", "value"])
        flat = dict(report)
        for key, value in flat.pop("ap", {}).items():
            writer.writerow([f"ap@{key}", "" if value is None else format(value, ".17g")])
        for key, value in flat.pop("tp_errors", {}).items():
            writer.writerow([key, format(value, ".17g")])
        for key, value in flat.items():
            if isinstance(value, float):
                value = format(value, ".17g")
            writer.writerow([key, "" if value is None else value])
        _write_text(args.out, buf.getvalue())
    return 0


def _cmd_symmetry_check(args) -> int:
    rig = make_symmetric_rig(args.cameras)
    rng = np.random.default_rng(args.seed)
    r = rng.uniform(5.0, 40.0, size=args.points)
    a = rng.uniform(-math.pi, math.pi, size=args.points)
    z = rng.uniform(-1.0, 1.0, size=args.points)
    points = np.stack([r * np.cos(a), r * np.sin(a), z], axis=1)
    max_px, max_depth = max_rotation_discrepancy(rig, points)
    report = {
        "cameras": args.cameras,
        "seed": args.seed,
        "points": args.points,
        "max_pixel_error": max_px,
        "max_depth_error": max_depth,
    }
    _write_text(args.out, serialization.dumps_json(report) + "\n")
    return 0


def _cmd_range_demo(args) -> int:
    objects, circular, rectangular = assignment.range_ambiguity_fixture()
    kept_c, _ = assignment.filter_perception_range(objects, circular)
    kept_r, dropped_r = assignment.filter_perception_range(objects, rectangular)
    index = {id(box): i for i, box in enumerate(objects)}
    report = {
        "objects": [
            {"x": b.x, "y": b.y, "r": math.hypot(b.x, b.y)} for b in objects
        ],
        "circular": {"r_max": circular.r_max, "kept": [index[id(b)] for b in kept_c]},
        "rectangular": {
            "x_max": rectangular.x_max,
            "y_max": rectangular.y_max,
            "kept": [index[id(b)] for b in kept_r],
            "dropped": [index[id(b)] for b in dropped_r],
        },
    }
    _write_text(args.out, serialization.dumps_json(report) + "\n")
    return 0


def _cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    rc = RangeConfig()
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["fixture_id", "max_rel_error"])
    for fid in range(args.fixtures):
        enc, vel, gt_box, gt_vel = loss.random_gradient_fixture(rng, rc)
        analytic = loss.loss_gradient(enc, vel, gt_box, gt_vel, rc)
        numeric = loss.finite_difference_gradient(enc, vel, gt_box, gt_vel, rc)
        scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        rel = float(np.max(np.abs(analytic - numeric) / scale))
        writer.writerow([fid, format(rel, ".17g")])
    _write_text(args.out, buf.getvalue())
    return 0


def _cmd_nds(args) -> int:
    tps = [float(v) for v in args.tps.split(",")]
    score = metrics.nds(args.map, tps)
    sys.stdout.write(f"{score:.3f}\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_range_flags(p: _Parser) -> None:
    p.add_argument("--range-mode", choices=["circular", "rectangular", "none"], default="circular")
    p.add_argument("--r-max", type=float, default=50.0)
    p.add_argument("--x-max", type=float, default=50.0)
    p.add_argument("--y-max", type=float, default=50.0)


def build_parser() -> _Parser:
    parser = _Parser(prog="polarview", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic scene JSON")
    p.add_argument("--objects", type=int, default=5)
    p.add_argument("--frames", type=int, default=1)
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--cameras", type=int, default=6)
    p.add_argument("--r-max", type=float, default=50.0)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--speed-min", type=float, default=0.0)
    p.add_argument("--speed-max", type=float, default=8.0)
    p.add_argument("--ego", choices=["static", "straight", "arc"], default="static")
    p.add_argument("--ego-speed", type=float, default=5.0)
    p.add_argument("--ego-yaw-rate", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("render", help="render noisy detections from a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--radial-std", type=float, default=0.0)
    p.add_argument("--tangential-std", type=float, default=0.0)
    p.add_argument("--z-std", type=float, default=0.0)
    p.add_argument("--size-std", type=float, default=0.0)
    p.add_argument("--yaw-std", type=float, default=0.0)
    p.add_argument("--velocity-std", type=float, default=0.0)
    p.add_argument("--drop-prob", type=float, default=0.0)
    p.add_argument("--fp-rate", type=float, default=0.0)
    p.add_argument("--noise-frame", choices=["polar", "cartesian"], default="polar")
    p.add_argument("--r-max", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("assign", help="Hungarian assignment of detections to ground truth")
    p.add_argument("--scene", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--k-scaling", type=float, default=20.0)
    p.add_argument("--class-cost", choices=["negative_prob", "focal"], default="negative_prob")
    _add_range_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("track", help="tracking-by-detection over a detection set")
    p.add_argument("--detections", required=True)
    p.add_argument("--scene", default=None, help="optional ground truth for id-switch count")
    p.add_argument("--threshold", type=float, default=2.0)
    p.add_argument("--max-misses", type=int, default=2)
    p.add_argument("--matching", choices=["greedy", "hungarian"], default="greedy")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval", help="detection metrics against scene ground truth")
    p.add_argument("--scene", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--thresholds", default="0.5,1,2,4", help="AP center-distance thresholds (m)")
    p.add_argument("--tp-threshold", type=float, default=2.0)
    p.add_argument("--maae", type=float, default=1.0, help="attribute error fed into the composite score")
    _add_range_flags(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("symmetry-check", help="max projection discrepancy under rig rotation")
    p.add_argument("--cameras", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_symmetry_check)

    p = sub.add_parser("range-demo", help="circular vs rectangular filtering of an equal-radius pair")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_range_demo)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradient errors (CSV)")
    p.add_argument("--fixtures", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("nds", help="composite detection score from published sub-metrics")
    p.add_argument("--map", type=float, required=True)
    p.add_argument("--tps", required=True, help="comma-separated mATE,mASE,mAOE,mAVE,mAAE")
    p.set_defaults(func=_cmd_nds)

    for sp in sub.choices.values():
        sp.add_argument("--config", default=None, help="JSON file whose keys override flags")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(args)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except OSError as exc:
        sys.stderr.write(f"polarview: i/o error: {exc}\n")
        return 2
    except (ValueError, KeyError, TypeError) as exc:
        sys.stderr.write(f"polarview: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
