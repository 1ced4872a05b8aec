"""Facial keypoints, rigid alignment, margin cropping, triplet preprocessing.

The triplet path: align the first and last frames so the inter-eye
segment is horizontal with its midpoint at the frame center (rotation
and shift only, never scale: the scale change between the frames is the
signal the flow stage feeds on), crop each frame around its own face
box with a 10% margin, and resize every crop to a fixed side. The
middle frame is cropped and resized without the alignment step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import ImageBuffer, Transform2D, resize, warp

__all__ = [
    "KeyPoints",
    "FaceBox",
    "PreprocessedPair",
    "GeometryError",
    "rigid_align",
    "rigid_align_transform",
    "crop_with_margin",
    "crop_transform",
    "preprocess_triplet",
    "load_annotations",
    "save_annotations",
    "FrameAnnotation",
]

CROP_SIZE = 256
DEFAULT_MARGIN = 0.10

KEYPOINT_NAMES = ("left_eye", "right_eye", "nose", "mouth_left", "mouth_right")


class GeometryError(ValueError):
    """Invalid keypoints, box or preprocessing input."""


@dataclass(frozen=True)
class KeyPoints:
    """Five facial landmarks in pixel coordinates (x, y)."""

    left_eye: tuple[float, float]
    right_eye: tuple[float, float]
    nose: tuple[float, float]
    mouth_left: tuple[float, float]
    mouth_right: tuple[float, float]

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise GeometryError("keypoints must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.left_eye, self.right_eye, self.nose,
                         self.mouth_left, self.mouth_right], dtype=np.float64)

    def transformed(self, t: Transform2D) -> "KeyPoints":
        pts = t.apply(self.as_array())
        return KeyPoints(*[tuple(p) for p in pts])

    def eye_midpoint(self) -> tuple[float, float]:
        return ((self.left_eye[0] + self.right_eye[0]) / 2.0,
                (self.left_eye[1] + self.right_eye[1]) / 2.0)

    def eye_distance(self) -> float:
        return math.hypot(self.right_eye[0] - self.left_eye[0],
                          self.right_eye[1] - self.left_eye[1])

    def upright(self) -> bool:
        """Right eye to the right of the left eye, as seen in the image."""
        return self.right_eye[0] > self.left_eye[0]

    def to_json(self) -> dict:
        return {name: [float(v) for v in getattr(self, name)] for name in KEYPOINT_NAMES}

    @classmethod
    def from_json(cls, obj: dict) -> "KeyPoints":
        try:
            return cls(**{name: tuple(obj[name]) for name in KEYPOINT_NAMES})
        except KeyError as exc:
            raise GeometryError(f"missing keypoint {exc}") from exc


@dataclass(frozen=True)
class FaceBox:
    """Axis-aligned face bounding box in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise GeometryError(f"nonpositive box {self.w}x{self.h}")
        if not np.all(np.isfinite([self.x, self.y, self.w, self.h])):
            raise GeometryError("box must be finite")

    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def to_json(self) -> list[float]:
        return [float(self.x), float(self.y), float(self.w), float(self.h)]

    @classmethod
    def from_json(cls, obj) -> "FaceBox":
        if len(obj) != 4:
            raise GeometryError(f"box must be [x, y, w, h], got {obj!r}")
        return cls(*[float(v) for v in obj])

    def transformed_center(self, t: Transform2D) -> "FaceBox":
        """Same size, center mapped through a rigid transform."""
        cx, cy = t.apply(np.array([self.center()]))[0]
        return FaceBox(cx - self.w / 2.0, cy - self.h / 2.0, self.w, self.h)

    def transformed_bounds(self, t: Transform2D) -> "FaceBox":
        """Axis-aligned bounds of the four transformed corners."""
        corners = np.array([
            [self.x, self.y],
            [self.x + self.w, self.y],
            [self.x, self.y + self.h],
            [self.x + self.w, self.y + self.h],
        ])
        mapped = t.apply(corners)
        x0, y0 = mapped.min(axis=0)
        x1, y1 = mapped.max(axis=0)
        return FaceBox(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class PreprocessedPair:
    """Aligned, cropped, resized triplet ready for the flow stage.

    Transforms map original frame coordinates into crop coordinates and
    let analytic ground truth be carried through the preprocessing.
    """

    f1_crop: ImageBuffer
    f2_crop: ImageBuffer
    f3_crop: ImageBuffer
    crop_side_f1: int
    t1: Transform2D
    t2: Transform2D
    t3: Transform2D

    def __post_init__(self):
        for crop in (self.f1_crop, self.f2_crop, self.f3_crop):
            if crop.width != CROP_SIZE or crop.height != CROP_SIZE:
                raise GeometryError(f"crops must be {CROP_SIZE}x{CROP_SIZE}")


def rigid_align_transform(points: KeyPoints, frame_w: int, frame_h: int) -> Transform2D:
    """Rotation+shift making the eye segment horizontal, midpoint at center."""
    if points.eye_distance() <= 2.0:
        raise GeometryError("eye points coincident or too close for alignment")
    dx = points.right_eye[0] - points.left_eye[0]
    dy = points.right_eye[1] - points.left_eye[1]
    angle = math.atan2(dy, dx)
    mid = points.eye_midpoint()
    center = ((frame_w - 1) / 2.0, (frame_h - 1) / 2.0)
    rot = Transform2D.rotation(-angle, center=mid)
    shift = Transform2D.translation(center[0] - mid[0], center[1] - mid[1])
    return rot.then(shift)


def rigid_align(points: KeyPoints, img: ImageBuffer) -> tuple[ImageBuffer, Transform2D]:
    t = rigid_align_transform(points, img.width, img.height)
    return warp(img, t, img.width, img.height), t


def _expanded_square(box: FaceBox, margin: float) -> tuple[float, float, float]:
    """(origin_x, origin_y, side) of the margin-expanded bounding square."""
    we = box.w * (1.0 + 2.0 * margin)
    he = box.h * (1.0 + 2.0 * margin)
    side = max(we, he)
    cx, cy = box.center()
    return cx - side / 2.0, cy - side / 2.0, side


def crop_transform(box: FaceBox, margin: float = DEFAULT_MARGIN) -> tuple[Transform2D, int]:
    """Frame-to-crop translation and the integer crop side."""
    if margin < 0:
        raise GeometryError(f"negative margin {margin}")
    x0, y0, side = _expanded_square(box, margin)
    side_px = max(1, int(round(side)))
    return Transform2D.translation(-x0, -y0), side_px


def crop_with_margin(img: ImageBuffer, box: FaceBox, margin: float = DEFAULT_MARGIN) -> ImageBuffer:
    """Square crop of the margin-expanded box, edge-replicated off-image."""
    t, side_px = crop_transform(box, margin)
    return warp(img, t, side_px, side_px)


def _resize_transform(in_side: int, out_side: int) -> Transform2D:
    if in_side == 1:
        return Transform2D.identity()
    return Transform2D.scaling((out_side - 1) / (in_side - 1))


def _crop_resize(img: ImageBuffer, box: FaceBox, margin: float,
                 out_size: int) -> tuple[ImageBuffer, Transform2D, int]:
    t_crop, side_px = crop_transform(box, margin)
    crop = warp(img, t_crop, side_px, side_px)
    return resize(crop, out_size, out_size), t_crop.then(_resize_transform(side_px, out_size)), side_px


def preprocess_triplet(f1: ImageBuffer, f2: ImageBuffer, f3: ImageBuffer,
                       kp1: KeyPoints, kp2: KeyPoints, kp3: KeyPoints,
                       box1: FaceBox, box2: FaceBox, box3: FaceBox,
                       margin: float = DEFAULT_MARGIN,
                       out_size: int = CROP_SIZE,
                       shared_box: bool = False) -> PreprocessedPair:
    """Full preprocessing of the checkpoint triplet.

    f1 and f3 are rigid-aligned and cropped around their own face box;
    f2 skips the alignment step. With shared_box=True the f3 crop reuses
    the f1 box size (comparison variant: planar scale change then
    survives into the flow instead of being normalized away).
    """
    a1, t1a = rigid_align(kp1, f1)
    a3, t3a = rigid_align(kp3, f3)
    b1 = box1.transformed_center(t1a)
    b3 = box3.transformed_center(t3a)
    if shared_box:
        cx, cy = b3.center()
        b3 = FaceBox(cx - b1.w / 2.0, cy - b1.h / 2.0, b1.w, b1.h)

    c1, t1c, side1 = _crop_resize(a1, b1, margin, out_size)
    c3, t3c, _ = _crop_resize(a3, b3, margin, out_size)
    c2, t2, _ = _crop_resize(f2, box2, margin, out_size)

    pair = PreprocessedPair(
        f1_crop=c1, f2_crop=c2, f3_crop=c3, crop_side_f1=side1,
        t1=t1a.then(t1c), t2=t2, t3=t3a.then(t3c))
    return pair


# ---------------------------------------------------------------------------
# Sidecar annotations: per-frame {box: [x,y,w,h], keypoints: {...}}.


@dataclass(frozen=True)
class FrameAnnotation:
    box: FaceBox | None
    keypoints: KeyPoints | None

    def to_json(self) -> dict:
        return {
            "box": self.box.to_json() if self.box else None,
            "keypoints": self.keypoints.to_json() if self.keypoints else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FrameAnnotation":
        box = FaceBox.from_json(obj["box"]) if obj.get("box") else None
        kp = KeyPoints.from_json(obj["keypoints"]) if obj.get("keypoints") else None
        return cls(box=box, keypoints=kp)


def save_annotations(path: str | Path, frames: list[FrameAnnotation],
                     extra: dict | None = None) -> None:
    doc = dict(extra or {})
    doc["frames"] = [f.to_json() for f in frames]
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def load_annotations(path: str | Path) -> tuple[list[FrameAnnotation], dict]:
    """Returns the per-frame annotations and any extra top-level fields."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GeometryError(f"malformed annotations {path}: {exc}") from exc
    if not isinstance(doc, dict) or "frames" not in doc:
        raise GeometryError(f"annotations {path} missing 'frames'")
    frames = [FrameAnnotation.from_json(f) for f in doc["frames"]]
    extra = {k: v for k, v in doc.items() if k != "frames"}
    return frames, extra
