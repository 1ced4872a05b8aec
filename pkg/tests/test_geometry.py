"""Keypoint alignment, margin cropping and triplet preprocessing."""

import math

import numpy as np
import pytest

from flowgate.geometry import (FaceBox, FrameAnnotation, GeometryError,
                               KeyPoints, crop_with_margin, load_annotations,
                               preprocess_triplet, rigid_align,
                               rigid_align_transform, save_annotations)
from flowgate.imaging import ImageBuffer, Transform2D

from test_imaging import smooth_image


def keypoints_at(cx, cy, eye_dx=20.0, tilt=0.0):
    """Five-point layout centered at the eye midpoint (cx, cy)."""
    c, s = math.cos(tilt), math.sin(tilt)

    def rot(px, py):
        return (cx + c * px - s * py, cy + s * px + c * py)

    return KeyPoints(
        left_eye=rot(-eye_dx, 0), right_eye=rot(eye_dx, 0),
        nose=rot(0, 18), mouth_left=rot(-12, 34), mouth_right=rot(12, 34))


class TestRigidAlign:
    def test_already_aligned_is_identity(self):
        img = smooth_image(64, seed=1)
        kp = keypoints_at((64 - 1) / 2, (64 - 1) / 2)
        _, t = rigid_align(kp, img)
        assert t.matrix == pytest.approx(np.eye(3), abs=1e-12)

    def test_tilt_recovers_minus_angle(self):
        img = smooth_image(64, seed=2)
        kp = keypoints_at(31.5, 31.5, tilt=math.pi / 4)
        _, t = rigid_align(kp, img)
        angle = math.atan2(t.matrix[1, 0], t.matrix[0, 0])
        assert angle == pytest.approx(-math.pi / 4, abs=1e-9)

    def test_random_rigid_composes_to_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            w = h = 100
            theta = rng.uniform(-0.6, 0.6)
            shift = rng.uniform(-10, 10, size=2)
            motion = Transform2D.rotation(theta, (49.5, 49.5)).then(
                Transform2D.translation(*shift))
            base = keypoints_at(49.5, 49.5)
            moved = base.transformed(motion)
            t = rigid_align_transform(moved, w, h)
            # align(motion(base)) must land base back on the canonical pose
            total = motion.then(t)
            recovered = base.transformed(total)
            canon = rigid_align_transform(base, w, h)
            expected = base.transformed(canon)
            assert recovered.as_array() == pytest.approx(expected.as_array(), abs=1e-6)

    def test_no_scale_in_transform(self):
        kp = keypoints_at(30.0, 40.0, tilt=0.3)
        t = rigid_align_transform(kp, 100, 100)
        assert np.linalg.det(t.matrix[:2, :2]) == pytest.approx(1.0, abs=1e-9)

    def test_coincident_eyes_rejected(self):
        kp = KeyPoints((10, 10), (11, 10.5), (10, 20), (5, 30), (15, 30))
        with pytest.raises(GeometryError):
            rigid_align_transform(kp, 64, 64)

    def test_eyes_made_horizontal(self):
        img = smooth_image(80, seed=4)
        kp = keypoints_at(40, 35, tilt=0.25)
        _, t = rigid_align(kp, img)
        out = kp.transformed(t)
        assert out.left_eye[1] == pytest.approx(out.right_eye[1], abs=1e-9)
        mid = out.eye_midpoint()
        assert mid == pytest.approx(((80 - 1) / 2, (80 - 1) / 2), abs=1e-9)


class TestCropWithMargin:
    def test_margin_ten_percent_rect(self):
        img = smooth_image(400, seed=5)
        crop = crop_with_margin(img, FaceBox(100, 100, 100, 100), margin=0.10)
        assert crop.width == crop.height == 120
        # crop rect is (90, 90) + 120: spot-check the origin pixel
        assert crop.samples[0, 0, 0] == pytest.approx(img.samples[90, 90, 0], abs=1e-12)

    def test_zero_margin_exact_box(self):
        img = smooth_image(64, seed=6)
        crop = crop_with_margin(img, FaceBox(10, 12, 20, 20), margin=0.0)
        assert crop.width == 20
        assert crop.samples == pytest.approx(img.samples[12:32, 10:30], abs=1e-12)

    def test_corner_box_replicates(self):
        img = smooth_image(50, seed=7)
        crop = crop_with_margin(img, FaceBox(0, 0, 30, 30), margin=0.10)
        assert crop.width == crop.height == 36
        # off-image area replicates row/column 0
        assert crop.samples[0, 0, 0] == pytest.approx(img.samples[0, 0, 0])

    def test_nonsquare_box_bounding_square(self):
        img = smooth_image(200, seed=8)
        crop = crop_with_margin(img, FaceBox(50, 50, 40, 80), margin=0.0)
        assert crop.width == crop.height == 80

    def test_translation_equivariance(self):
        img = smooth_image(120, seed=9)
        shifted = ImageBuffer(np.roll(img.samples, (7, 5), axis=(0, 1)))
        a = crop_with_margin(img, FaceBox(40, 40, 30, 30))
        b = crop_with_margin(shifted, FaceBox(45, 47, 30, 30))
        assert a.samples == pytest.approx(b.samples, abs=1e-12)

    def test_nonpositive_box_rejected(self):
        with pytest.raises(GeometryError):
            FaceBox(0, 0, 0, 10)


class TestPreprocessTriplet:
    def _inputs(self, seed=10):
        img = smooth_image(320, seed=seed, channels=3)
        kp = keypoints_at(159.5, 140.0, eye_dx=30)
        box = FaceBox(100, 90, 120, 130)
        return img, kp, box

    def test_identical_frames_identical_crops(self):
        img, kp, box = self._inputs()
        pair = preprocess_triplet(img, img, img, kp, kp, kp, box, box, box)
        assert pair.f1_crop == pair.f3_crop
        assert pair.f1_crop.width == 256

    def test_f2_not_derolled(self):
        img, kp, box = self._inputs()
        tilted = keypoints_at(159.5, 140.0, eye_dx=30, tilt=math.radians(20))
        pair = preprocess_triplet(img, img, img, kp, tilted, kp, box, box, box)
        # f2 skips alignment entirely: crop equals plain crop+resize
        from flowgate.geometry import _crop_resize
        expected, _, _ = _crop_resize(img, box, 0.10, 256)
        assert pair.f2_crop == expected

    def test_deterministic(self):
        img, kp, box = self._inputs(seed=11)
        p1 = preprocess_triplet(img, img, img, kp, kp, kp, box, box, box)
        p2 = preprocess_triplet(img, img, img, kp, kp, kp, box, box, box)
        assert p1.f1_crop == p2.f1_crop
        assert p1.f2_crop == p2.f2_crop
        assert p1.f3_crop == p2.f3_crop

    def test_crop_side_recorded(self):
        img, kp, box = self._inputs()
        pair = preprocess_triplet(img, img, img, kp, kp, kp, box, box, box)
        assert pair.crop_side_f1 == round(130 * 1.2)

    def test_transforms_map_frame_to_crop(self):
        img, kp, box = self._inputs()
        pair = preprocess_triplet(img, img, img, kp, kp, kp, box, box, box)
        # the aligned eye midpoint must land at the crop point that
        # corresponds to the frame center
        mid = pair.t1.apply(np.array([kp.eye_midpoint()]))[0]
        assert 0 <= mid[0] <= 255 and 0 <= mid[1] <= 255


class TestAnnotations:
    def test_round_trip(self, tmp_path):
        frames = [
            FrameAnnotation(box=FaceBox(1, 2, 3, 4),
                            keypoints=keypoints_at(10, 10)),
            FrameAnnotation(box=None, keypoints=None),
        ]
        path = tmp_path / "annotations.json"
        save_annotations(path, frames, extra={"label": "real"})
        loaded, extra = load_annotations(path)
        assert extra["label"] == "real"
        assert loaded[0].box == FaceBox(1, 2, 3, 4)
        assert loaded[0].keypoints == keypoints_at(10, 10)
        assert loaded[1].box is None

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(GeometryError):
            load_annotations(path)
