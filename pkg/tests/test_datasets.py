import json
import math

import numpy as np
import pytest

from foveate.datasets import (
    SCENE_LABELS,
    bbox_mask,
    generate_scene,
    keypoint_mask,
    load_manifest,
    make_suite,
)
from foveate.imgops import BoundingBox

from reference import ref_bbox_mask, ref_keypoint_mask


class TestLoadManifest:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text("")
        assert load_manifest(path) == []

    def test_normalized_record(self, tmp_path):
        path = tmp_path / "m.jsonl"
        rec = {
            "image_path": "img.png",
            "label": "cat",
            "coords": "normalized",
            "boxes": [[-0.5, -0.25, 0.5, 0.25]],
        }
        path.write_text(json.dumps(rec) + "\n")
        out = load_manifest(path)
        assert len(out) == 1
        assert out[0].label == "cat"
        assert out[0].boxes[0] == BoundingBox(-0.5, -0.25, 0.5, 0.25)

    def test_pixel_record_full_extent(self, tmp_path):
        path = tmp_path / "m.jsonl"
        rec = {
            "image_path": "img.png",
            "label": "dog",
            "coords": "pixel",
            "width": 200,
            "height": 100,
            "boxes": [[0, 0, 200, 100]],
        }
        path.write_text(json.dumps(rec) + "\n")
        out = load_manifest(path)
        box = out[0].boxes[0]
        assert (box.x_min, box.y_min, box.x_max, box.y_max) == (-1.0, -1.0, 1.0, 1.0)

    def test_invalid_box_names_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        good = {"image_path": "a.png", "label": "x", "boxes": [[-0.5, -0.5, 0.5, 0.5]]}
        bad = {"image_path": "b.png", "label": "x", "boxes": [[0.5, -0.5, -0.5, 0.5]]}
        path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
        with pytest.raises(ValueError, match="line 2"):
            load_manifest(path)

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"image_path": "a.png"\n')
        with pytest.raises(ValueError, match="line 1"):
            load_manifest(path)

    def test_keypoint_record(self, tmp_path):
        path = tmp_path / "m.jsonl"
        rec = {"image_path": "a.png", "label": "bird", "keypoints": [[0.1, -0.2], [0.3, 0.4]]}
        path.write_text(json.dumps(rec) + "\n")
        out = load_manifest(path)
        assert out[0].keypoints == ((0.1, -0.2), (0.3, 0.4))

    def test_record_without_annotation_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps({"image_path": "a.png", "label": "x"}) + "\n")
        with pytest.raises(ValueError, match="line 1"):
            load_manifest(path)


class TestBboxMask:
    def test_full_image_box(self):
        mask = bbox_mask([BoundingBox(-1, -1, 1, 1)], 11)
        assert mask.sum() == 121

    def test_center_only_box(self):
        mask = bbox_mask([BoundingBox(-0.05, -0.05, 0.05, 0.05)], 11)
        assert mask.sum() == 1
        assert mask[5, 5]

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            boxes = []
            for _ in range(rng.integers(1, 4)):
                xs = np.sort(rng.uniform(-1, 1, 2))
                ys = np.sort(rng.uniform(-1, 1, 2))
                if xs[1] - xs[0] < 1e-3 or ys[1] - ys[0] < 1e-3:
                    continue
                boxes.append(BoundingBox(xs[0], ys[0], xs[1], ys[1]))
            if not boxes:
                continue
            got = bbox_mask(boxes, 11)
            want = ref_bbox_mask([(b.x_min, b.y_min, b.x_max, b.y_max) for b in boxes], 11)
            np.testing.assert_array_equal(got, want)

    def test_monotone_under_enlargement(self):
        small = bbox_mask([BoundingBox(-0.3, -0.3, 0.3, 0.3)], 11)
        large = bbox_mask([BoundingBox(-0.6, -0.6, 0.6, 0.6)], 11)
        assert np.all(large[small])


class TestKeypointMask:
    def test_single_center_point(self):
        mask = keypoint_mask([(0.0, 0.0)], 11)
        assert mask[5, 5]

    def test_radius_grows_with_sigma(self):
        small = keypoint_mask([(0.0, 0.0)], 11, sigma_coeff=0.15)
        large = keypoint_mask([(0.0, 0.0)], 11, sigma_coeff=2.5)
        assert large.sum() > small.sum()

    def test_duplicate_points_idempotent(self):
        a = keypoint_mask([(0.2, -0.1)], 11)
        b = keypoint_mask([(0.2, -0.1), (0.2, -0.1)], 11)
        np.testing.assert_array_equal(a, b)

    def test_empty_points_rejected(self):
        with pytest.raises(ValueError):
            keypoint_mask([], 11)

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            pts = [tuple(rng.uniform(-0.9, 0.9, 2)) for _ in range(rng.integers(1, 6))]
            got = keypoint_mask(pts, 11, sigma_coeff=0.15, threshold=0.2)
            want = ref_keypoint_mask(pts, 11, 0.15, 0.2, 0.1)
            np.testing.assert_array_equal(got, want)

    def test_peak_cell_always_set(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            pts = [tuple(rng.uniform(-0.8, 0.8, 2)) for _ in range(rng.integers(1, 4))]
            mask = keypoint_mask(pts, 11, threshold=1.0)
            assert mask.any()


class TestGenerateScene:
    def test_deterministic(self):
        a = generate_scene(42, "red-disk", (-0.3, -0.3), 0.25, 0.5, clutter=2)
        b = generate_scene(42, "red-disk", (-0.3, -0.3), 0.25, 0.5, clutter=2)
        np.testing.assert_array_equal(a.image, b.image)
        assert a.box == b.box

    def test_red_disk_area_fraction(self):
        scene = generate_scene(7, "red-disk", (0.0, 0.0), 0.3, 0.0, clutter=0, size=128)
        img = scene.image
        red = (img[:, :, 0] > 0.7) & (img[:, :, 1] < 0.3) & (img[:, :, 2] < 0.3)
        frac = red.mean()
        expect = math.pi * 0.3**2 / 4.0
        assert abs(frac - expect) <= 0.1 * expect

    def test_box_contains_shape(self):
        for label in SCENE_LABELS:
            scene = generate_scene(3, label, (0.2, -0.1), 0.2, 0.7, clutter=0, size=96)
            img = scene.image
            bg = generate_scene(3, label, (0.2, -0.1), 0.2, 0.7, clutter=0, size=96, draw_shape=False).image
            changed = np.any(np.abs(img - bg) > 1e-12, axis=2)
            ii, jj = np.nonzero(changed)
            xs = (2 * jj + 1) / 96 - 1
            ys = (2 * ii + 1) / 96 - 1
            b = scene.box
            assert xs.min() >= b.x_min and xs.max() <= b.x_max
            assert ys.min() >= b.y_min and ys.max() <= b.y_max
            # bounding square of the shape stays within circumradius + slack
            assert b.width <= 2 * 0.2 + 4 / 96
            assert b.height <= 2 * 0.2 + 4 / 96

    def test_out_of_frame_rejected(self):
        with pytest.raises(ValueError):
            generate_scene(0, "red-disk", (0.95, 0.0), 0.2, 0.0)

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError):
            generate_scene(0, "pink-hexagon", (0.0, 0.0), 0.2, 0.0)

    def test_invalid_scale_rejected(self):
        with pytest.raises(ValueError):
            generate_scene(0, "red-disk", (0.0, 0.0), 0.7, 0.0)


class TestMakeSuite:
    def test_deterministic(self):
        a = make_suite(9, 12)
        b = make_suite(9, 12)
        for sa, sb in zip(a, b):
            np.testing.assert_array_equal(sa.image, sb.image)
            assert sa.label == sb.label

    def test_round_robin_labels(self):
        suite = make_suite(1, 18)
        assert [s.label for s in suite[:9]] == list(SCENE_LABELS)
        assert [s.label for s in suite[9:]] == list(SCENE_LABELS)

    def test_objects_off_center(self):
        suite = make_suite(2, 9)
        for s in suite:
            assert math.hypot(*s.center) >= 0.3
