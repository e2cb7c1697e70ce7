import json
import math

import numpy as np
import pytest

from polarview.serialization import (
    SCHEMA_VERSION,
    detections_from_dict,
    detections_to_dict,
    dumps_json,
    load_detections,
    load_scene,
    save_detections,
    save_scene,
    scene_from_dict,
    scene_to_dict,
)
from polarview.simulator import NoiseModel, SceneConfig, generate_scene, render_detections


def make_scene(seed=0, frames=3):
    return generate_scene(
        SceneConfig(n_objects=4, n_frames=frames, seed=seed, ego_motion="arc", speed_max=6.0)
    )


class TestJsonWriter:
    def test_float_precision_roundtrips_exactly(self):
        values = [math.pi, 1/ 3, 1e-17, 123456789.123456789, 2.0**-40]
        text = dumps_json(values)
        assert json.loads(text) == values

    def test_seventeen_significant_digits(self):
        assert dumps_json(math.pi) == "3.1415926535897931"

    def test_ints_stay_ints(self):
        assert dumps_json({"a": 3, "b": 3.0})== '{\n  "a": 3,\n  "b": 3\n}'

    def test_negative_zero_canonicalized(self):
        assert dumps_json(-0.0) == "0"

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            dumps_json(math.inf)

    def test_nested_structures_parse(self):
        obj = {"xs": [1.5, {"y": [True, None, "s"]}], "empty": [], "none": {}}
        assert json.loads(dumps_json(obj)) == obj


class TestSceneRoundtrip:
    def test_exact_roundtrip(self):
        scene = make_scene()
        restored = scene_from_dict(json.loads(dumps_json(scene_to_dict(scene))))
        assert dumps_json(scene_to_dict(restored)) == dumps_json(scene_to_dict(scene))
        for fa, fb in zip(scene.frames, restored.frames):
            assert fa.t == fb.t
            np.testing.assert_array_equal(fa.ego_pose.rotation, fb.ego_pose.rotation)
            for oa, ob in zip(fa.objects, fb.objects):
                assert oa == ob

    def test_file_roundtrip(self, tmp_path):
        scene = make_scene(seed=5)
        path = tmp_path / "scene.json"
        save_scene(scene, str(path))
        restored = load_scene(str(path))
        assert dumps_json(scene_to_dict(restored)) == dumps_json(scene_to_dict(scene))

    def test_schema_fields(self):
        d = scene_to_dict(make_scene())
        assert d["schema_version"] == SCHEMA_VERSION
        cam = d["rig"][0]
        assert len(cam["intrinsics"]) == 4
        assert len(cam["extrinsics"]["rotation"]) == 9
        assert len(cam["extrinsics"]["translation"]) == 3
        assert len(cam["image_size"]) == 2
        obj = d["frames"][0]["objects"][0]
        assert len(obj["box"]) == 7
        assert len(obj["velocity"]) == 2
        assert set(obj) == {"id", "class", "box", "velocity"}

    def test_rejects_unknown_version(self):
        d = scene_to_dict(make_scene())
        d["schema_version"] = 99
        with pytest.raises(ValueError):
            scene_from_dict(d)


class TestDetectionsRoundtrip:
    def test_exact_roundtrip(self, tmp_path):
        scene = make_scene(seed=6)
        dets = render_detections(
            scene, NoiseModel(radial_std=0.4, tangential_std=0.01, velocity_std=0.2, seed=1)
        )
        path = tmp_path / "dets.json"
        save_detections(dets, str(path))
        restored = load_detections(str(path))
        assert dumps_json(detections_to_dict(restored)) == dumps_json(detections_to_dict(dets))
        for fa, fb in zip(dets.frames, restored.frames):
            for da, db in zip(fa.detections, fb.detections):
                np.testing.assert_array_equal(da.box.as_array(), db.box.as_array())
                np.testing.assert_array_equal(da.probs, db.probs)
                assert da.score == db.score

    def test_polar_field_order(self):
        scene = make_scene(seed=7)
        dets = render_detections(scene, NoiseModel())
        d = detections_to_dict(dets)
        det = d["frames"][0]["detections"][0]
        box = det["box"]
        assert len(box) == 9
        # (r, sin_a, cos_a, ...) with a unit azimuth pair
        assert box[1] ** 2 + box[2] ** 2 == pytest.approx(1.0, abs=1e-9)
        assert detections_from_dict(d).frames[0].detections[0].box.r == box[0]
