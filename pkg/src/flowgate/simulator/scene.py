"""Synthetic approaching-face recordings with analytic ground truth.

One pinhole camera at the origin looks down +z; the virtual focal
length equals the frame height in pixels, so a face of physical height
H at distance Z projects to a relative height of exactly H/Z. Genuine
faces are textured relief surfaces; attacks are textured planes (paper,
screen, face-shaped mask) or screens replaying rendered sequences.
Every scene knows its exact pixel-to-pixel motion between any two
frames, which is what the flow-stage tests lean on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.ndimage import gaussian_filter

from ..geometry import (FaceBox, KeyPoints, crop_transform,
                        rigid_align_transform)
from ..imaging import ImageBuffer, Transform2D, sample_plane
from ..flow.field import FlowField

__all__ = ["AttackClass", "SceneSpec", "RenderedSequence", "SimulatorError",
           "render", "ground_truth_flow", "SCREEN_CLASSES"]


class SimulatorError(ValueError):
    """Inconsistent scene specification."""


class AttackClass(str, enum.Enum):
    REAL = "real"
    SCREEN_PHOTO = "screen_photo"
    PRINTED_PHOTO = "printed_photo"
    PRINTED_MASK = "printed_mask"
    DYNAMIC_VIDEO = "dynamic_video"
    STATIC_VIDEO = "static_video"


SCREEN_CLASSES = frozenset({AttackClass.SCREEN_PHOTO, AttackClass.DYNAMIC_VIDEO,
                            AttackClass.STATIC_VIDEO})
PRINT_CLASSES = frozenset({AttackClass.PRINTED_PHOTO, AttackClass.PRINTED_MASK})

# Canonical face geometry in world units (face height = 1).
FACE_HEIGHT = 1.0
FACE_WIDTH = FACE_HEIGHT / 1.12
_EYE_X = 0.21 * FACE_WIDTH
_EYE_Y = -0.12 * FACE_HEIGHT
_NOSE = (0.0, 0.06 * FACE_HEIGHT)
_MOUTH_X = 0.15 * FACE_WIDTH
_MOUTH_Y = 0.27 * FACE_HEIGHT

_DEFAULT_DEPTH = 0.25
_DEFAULT_MOIRE = 0.005
_DEFAULT_GRID_PERIOD = 3.0

_START_REL = 0.50
_STATIC_REL = 0.55
_PAPER_SIZE = 2.0          # paper/screen side, world units (x face height)
_EYE_RECESS = 0.015         # mask eye-cutout depth offset behind the mask


@dataclass(frozen=True)
class SceneSpec:
    """Parametric description of one genuine or attack recording."""

    attack: AttackClass = AttackClass.REAL
    texture_seed: int = 0
    depth_amplitude: float | None = None      # Real only; default 0.25
    approach_ratio: float = 1.5               # start/end distance ratio
    frames: int = 30
    frame_size: int = 320
    moire_strength: float | None = None       # screen classes only
    pixel_grid_period: float | None = None    # screen classes only
    noise_sigma: float = 0.004

    def __post_init__(self):
        if self.frames < 3:
            raise SimulatorError(f"need at least 3 frames, got {self.frames}")
        if self.approach_ratio <= 1.0:
            raise SimulatorError("approach ratio must exceed 1")
        if self.frame_size < 64:
            raise SimulatorError("frame size too small")
        if self.noise_sigma < 0:
            raise SimulatorError("negative noise sigma")
        attack = AttackClass(self.attack)
        object.__setattr__(self, "attack", attack)
        if self.depth_amplitude is not None and attack is not AttackClass.REAL:
            raise SimulatorError(f"depth_amplitude is meaningless for {attack.value}")
        screen = attack in SCREEN_CLASSES
        if not screen and (self.moire_strength is not None
                           or self.pixel_grid_period is not None):
            raise SimulatorError(f"screen artifacts are meaningless for {attack.value}")

    @property
    def depth(self) -> float:
        return _DEFAULT_DEPTH if self.depth_amplitude is None else self.depth_amplitude

    @property
    def moire(self) -> float:
        return _DEFAULT_MOIRE if self.moire_strength is None else self.moire_strength

    @property
    def grid_period(self) -> float:
        return (_DEFAULT_GRID_PERIOD if self.pixel_grid_period is None
                else self.pixel_grid_period)


# ---------------------------------------------------------------------------
# Charts: seeded textures sampled by world coordinates.


def _smooth_noise(rng, shape, sigma) -> np.ndarray:
    n = gaussian_filter(rng.standard_normal(shape), sigma)
    s = n.std()
    return n / s if s > 0 else n


class _Chart:
    """RGB texture over a rectangular world-coordinate span."""

    def __init__(self, rgb: np.ndarray, span: tuple[float, float, float, float]):
        self.rgb = np.clip(rgb, 0.0, 1.0)
        self.x0, self.x1, self.y0, self.y1 = span
        self.n = rgb.shape[0]

    def _grid(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gx = (x - self.x0) / (self.x1 - self.x0) * (self.n - 1)
        gy = (y - self.y0) / (self.y1 - self.y0) * (self.n - 1)
        return gx, gy

    def sample(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        gx, gy = self._grid(x, y)
        out = np.empty(x.shape + (3,))
        for c in range(3):
            out[..., c] = sample_plane(self.rgb[:, :, c], gx, gy)
        return out

    def sample_scalar(self, plane: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        gx, gy = self._grid(x, y)
        return sample_plane(plane, gx, gy)


def _face_ellipse_radius(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sqrt((x / (FACE_WIDTH / 2)) ** 2 + (y / (FACE_HEIGHT / 2)) ** 2)


def _bump(x, y, cx, cy, sx, sy):
    return np.exp(-((x - cx) ** 2 / (2 * sx ** 2) + (y - cy) ** 2 / (2 * sy ** 2)))


def _relief_raw(x, y):
    """Structured face relief: dome, nose, brow, cheekbones, chin, sockets."""
    dome = np.maximum(0.0, 1.0 - _face_ellipse_radius(x, y) ** 2)
    nose = _bump(x, y, _NOSE[0], _NOSE[1], 0.11, 0.13)
    brow = _bump(x, y, 0.0, _EYE_Y - 0.07, 0.30, 0.05)
    chin = _bump(x, y, 0.0, 0.40, 0.13, 0.08)
    cheeks = (_bump(x, y, -0.33 * FACE_WIDTH, 0.08, 0.10, 0.12)
              + _bump(x, y, 0.33 * FACE_WIDTH, 0.08, 0.10, 0.12))
    sockets = (_bump(x, y, -_EYE_X, _EYE_Y, 0.08, 0.06)
               + _bump(x, y, _EYE_X, _EYE_Y, 0.08, 0.06))
    raw = (0.30 * dome + 0.55 * nose + 0.32 * brow + 0.45 * cheeks
           + 0.26 * chin - 0.38 * sockets)
    return np.maximum(raw, 0.0)


def _relief_unit(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Face relief in [0, 1], peaking at exactly 1 on the nose tip."""
    peak = float(_relief_raw(np.array(_NOSE[0]), np.array(_NOSE[1])))
    return _relief_raw(x, y) / peak


def _mark_ellipse(img, xs, ys, cx, cy, rx, ry, color, blend=1.0):
    m = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0
    img[m] = (1 - blend) * img[m] + blend * np.asarray(color)


def _build_face_chart(rng, n=384) -> _Chart:
    """Skin-toned noisy face texture with markings at the landmarks."""
    half_w, half_h = 0.55 * FACE_WIDTH, 0.55 * FACE_HEIGHT
    ax = np.linspace(-half_w, half_w, n)
    ay = np.linspace(-half_h, half_h, n)
    xs, ys = np.meshgrid(ax, ay)

    base = np.array([0.74, 0.57, 0.46]) + rng.uniform(-0.06, 0.06, 3)
    tex = np.empty((n, n, 3))
    broad = _smooth_noise(rng, (n, n), 10.0)
    mid = _smooth_noise(rng, (n, n), 4.0)
    fine = _smooth_noise(rng, (n, n), 1.6)
    for c in range(3):
        tex[..., c] = base[c] * (1.0 + 0.13 * broad + 0.12 * mid + 0.12 * fine)

    # landmark markings: brows, eyes with pupils, nostrils, mouth
    for sx in (-1, 1):
        ex = sx * _EYE_X
        _mark_ellipse(tex, xs, ys, ex, _EYE_Y - 0.055, 0.085 * FACE_WIDTH,
                      0.018 * FACE_HEIGHT, base * 0.35)
        _mark_ellipse(tex, xs, ys, ex, _EYE_Y, 0.065 * FACE_WIDTH,
                      0.032 * FACE_HEIGHT, [0.88, 0.86, 0.84])
        _mark_ellipse(tex, xs, ys, ex, _EYE_Y, 0.026 * FACE_WIDTH,
                      0.026 * FACE_WIDTH * 1.3, [0.16, 0.12, 0.10])
        _mark_ellipse(tex, xs, ys, sx * 0.035 * FACE_WIDTH, _NOSE[1] + 0.045,
                      0.016 * FACE_WIDTH, 0.010 * FACE_HEIGHT, base * 0.45)
    _mark_ellipse(tex, xs, ys, 0.0, _MOUTH_Y, _MOUTH_X * 1.15,
                  0.030 * FACE_HEIGHT, [0.62, 0.33, 0.31], blend=0.85)

    # bake Lambertian shading from the relief into the texture
    relief = _relief_unit(xs, ys)
    gy, gx = np.gradient(relief, ay, ax)
    nz = 1.0 / np.sqrt(gx ** 2 + gy ** 2 + 1.0)
    light = np.array([0.35, -0.45, 0.82])
    light = light / np.linalg.norm(light)
    lam = np.clip((-gx * light[0] - gy * light[1] + light[2]) * nz, 0.0, None)
    shade = 0.72 + 0.28 * lam
    inside = _face_ellipse_radius(xs, ys) <= 1.0
    tex[inside] *= shade[inside, None]
    return _Chart(tex, (-half_w, half_w, -half_h, half_h))


def _background_frame(rng, size: int) -> np.ndarray:
    """Static room backdrop, rendered once per scene (camera is fixed)."""
    tint = np.array([0.42, 0.44, 0.48]) + rng.uniform(-0.05, 0.05, 3)
    broad = _smooth_noise(rng, (size, size), 18.0)
    fine = _smooth_noise(rng, (size, size), 3.0)
    ramp = np.linspace(-1, 1, size)[:, None] * rng.uniform(-0.04, 0.04)
    out = np.empty((size, size, 3))
    for c in range(3):
        out[..., c] = tint[c] * (1.0 + 0.16 * broad + 0.10 * fine) + ramp
    return np.clip(out, 0.0, 1.0)


def _print_effect(rgb: np.ndarray, xs: np.ndarray, ys: np.ndarray, rng) -> np.ndarray:
    """Paper print look: desaturated, softened, with aperiodic grain.

    The grain lives in plane coordinates, so it rides along with the
    print and anchors the flow everywhere on the sheet.
    """
    luma = rgb @ np.array([0.299, 0.587, 0.114])
    desat = luma[..., None] + 0.55 * (rgb - luma[..., None])
    soft = np.stack([gaussian_filter(desat[..., c], 0.5) for c in range(3)], axis=-1)
    paper = 0.90 + 0.02 * rng.standard_normal()
    out = 0.92 * soft + 0.08 * paper
    grain = _smooth_noise(rng, xs.shape, 3.5)
    return np.clip(out + 0.05 * grain[..., None], 0.0, 1.0)


def _screen_tone(rgb: np.ndarray) -> np.ndarray:
    """Display emission: slight gamma lift and chroma boost."""
    luma = (rgb @ np.array([0.299, 0.587, 0.114]))[..., None]
    boosted = luma + 1.18 * (rgb - luma)
    return np.clip(boosted, 0.0, 1.0) ** 0.88


def _overlay_pattern(spec: SceneSpec, size: int) -> np.ndarray:
    """Camera-space pixel grid plus moire interference, additive, static."""
    xs, ys = np.meshgrid(np.arange(size, dtype=np.float64),
                         np.arange(size, dtype=np.float64))
    p = spec.grid_period
    grid = 0.5 * (np.sin(2 * math.pi * xs / p) + np.sin(2 * math.pi * ys / p))
    a, b = math.cos(0.3), math.sin(0.3)
    pm = p * 4.7
    moire = (np.sin(2 * math.pi * (xs * a + ys * b) / pm)
             * np.sin(2 * math.pi * (ys * a - xs * b) / (pm * 1.31)))
    return spec.moire * (0.3 * grid + moire)


# ---------------------------------------------------------------------------
# Scene models: per-frame rendering plus the exact pixel motion map.


class _SceneModel:
    """Rendering and point-transport interface shared by all classes."""

    def __init__(self, spec: SceneSpec):
        self.spec = spec
        self.size = spec.frame_size
        self.f = float(spec.frame_size)
        self.c = (spec.frame_size - 1) / 2.0

    # world <-> pixels
    def rays(self, xs_px, ys_px):
        return (xs_px - self.c) / self.f, (ys_px - self.c) / self.f

    def project(self, x, y, z):
        return self.c + self.f * x / z, self.c + self.f * y / z

    def distances(self) -> np.ndarray:
        rel = np.linspace(_START_REL, _START_REL * self.spec.approach_ratio,
                          self.spec.frames)
        return FACE_HEIGHT / rel

    def face_box(self, z: float) -> FaceBox:
        h = self.f * FACE_HEIGHT / z
        w = self.f * FACE_WIDTH / z
        return FaceBox(self.c - w / 2, self.c - h / 2, w, h)

    def keypoint_depth(self, x, y, z: float):
        """Depth of a canonical face point for this scene type."""
        return z

    def keypoints(self, z: float) -> KeyPoints:
        pts = {}
        canon = {
            "left_eye": (-_EYE_X, _EYE_Y), "right_eye": (_EYE_X, _EYE_Y),
            "nose": _NOSE, "mouth_left": (-_MOUTH_X, _MOUTH_Y),
            "mouth_right": (_MOUTH_X, _MOUTH_Y),
        }
        for name, (x, y) in canon.items():
            zz = self.keypoint_depth(np.array(x), np.array(y), z)
            px, py = self.project(x, y, float(zz))
            pts[name] = (float(px), float(py))
        return KeyPoints(**pts)

    def render_frame(self, idx: int) -> np.ndarray:
        raise NotImplementedError

    def map_pixels(self, i: int, j: int, xs_px, ys_px):
        """(x_j, y_j, valid): where frame-i pixels land in frame j."""
        raise NotImplementedError

    def frame_meta(self, idx: int) -> tuple[FaceBox, KeyPoints, float]:
        raise NotImplementedError


class _RealScene(_SceneModel):
    """Textured relief surface approaching the camera over a static room."""

    def __init__(self, spec: SceneSpec, seed_offset: int = 0):
        super().__init__(spec)
        rng = np.random.default_rng(np.random.SeedSequence([spec.texture_seed, 11, seed_offset]))
        self.chart = _build_face_chart(rng)
        self.bg = _background_frame(rng, self.size)
        self.z = self.distances()
        self.depth = spec.depth * FACE_WIDTH

    def relief(self, x, y):
        inside = _face_ellipse_radius(x, y) <= 1.0
        return np.where(inside, self.depth * _relief_unit(x, y), 0.0)

    def surface_coords(self, xs_px, ys_px, z: float):
        """Invert the projection onto the relief surface (fixed point)."""
        xr, yr = self.rays(xs_px, ys_px)
        r = np.zeros_like(xr)
        for _ in range(3):
            x = xr * (z - r)
            y = yr * (z - r)
            r = self.relief(x, y)
        return xr * (z - r), yr * (z - r), r

    def _footprint(self, x, y):
        return _face_ellipse_radius(x, y) <= 1.0

    def render_frame(self, idx: int) -> np.ndarray:
        z = self.z[idx]
        frame = self.bg.copy()
        box = self.face_box(z)
        pad = 6
        x0 = max(0, int(box.x) - pad)
        x1 = min(self.size, int(math.ceil(box.x + box.w)) + pad)
        y0 = max(0, int(box.y) - pad)
        y1 = min(self.size, int(math.ceil(box.y + box.h)) + pad)
        gx, gy = np.meshgrid(np.arange(x0, x1, dtype=np.float64),
                             np.arange(y0, y1, dtype=np.float64))
        x, y, _ = self.surface_coords(gx, gy, z)
        inside = self._footprint(x, y)
        rgb = self.chart.sample(x, y)
        sub = frame[y0:y1, x0:x1]
        sub[inside] = rgb[inside]
        return frame

    def map_pixels(self, i: int, j: int, xs_px, ys_px):
        zi, zj = self.z[i], self.z[j]
        x, y, r = self.surface_coords(xs_px, ys_px, zi)
        on_face = self._footprint(x, y)
        px, py = self.project(x, y, zj - r)
        out_x = np.where(on_face, px, xs_px)
        out_y = np.where(on_face, py, ys_px)
        # background occluded wherever frame j's face covers it
        xj, yj, _ = self.surface_coords(np.asarray(out_x, dtype=np.float64),
                                        np.asarray(out_y, dtype=np.float64), zj)
        covered_j = self._footprint(xj, yj)
        valid = on_face | ~covered_j
        return out_x, out_y, valid

    def keypoint_depth(self, x, y, z: float):
        return z - self.relief(x, y)

    def frame_meta(self, idx: int):
        z = self.z[idx]
        return self.face_box(z), self.keypoints(z), FACE_HEIGHT / z


class _PlaneScene(_SceneModel):
    """Fronto-parallel textured plane approaching over a static room."""

    face_shaped = False        # mask cut to the face outline
    eye_cutouts = False

    def __init__(self, spec: SceneSpec):
        super().__init__(spec)
        rng = np.random.default_rng(np.random.SeedSequence([spec.texture_seed, 11, 0]))
        face_chart = _build_face_chart(rng)
        self.bg = _background_frame(rng, self.size)
        self.z = self.distances()
        self.chart = self._build_plane_chart(face_chart, rng)
        if self.eye_cutouts:
            self.person = face_chart

    def _build_plane_chart(self, face_chart: _Chart, rng) -> _Chart:
        n = 640
        half = _PAPER_SIZE / 2
        ax = np.linspace(-half, half, n)
        xs, ys = np.meshgrid(ax, ax)
        paper = np.full((n, n, 3), 0.90)
        grain = _smooth_noise(rng, (n, n), 2.5)
        paper *= (1.0 + 0.03 * grain)[..., None]
        inside_chart = ((np.abs(xs) <= face_chart.x1) & (np.abs(ys) <= face_chart.y1))
        face_rgb = face_chart.sample(xs, ys)
        on_face = _face_ellipse_radius(xs, ys) <= 1.02
        blit = inside_chart & on_face
        paper[blit] = face_rgb[blit]
        paper = self._finish_chart(paper, xs, ys, rng)
        return _Chart(paper, (-half, half, -half, half))

    def _finish_chart(self, rgb, xs, ys, rng):
        return _print_effect(rgb, xs, ys, rng)

    def plane_extent(self, x, y):
        half = _PAPER_SIZE / 2
        return (np.abs(x) <= half) & (np.abs(y) <= half)

    def on_plane(self, x, y):
        if self.face_shaped:
            return _face_ellipse_radius(x, y) <= 1.06
        return self.plane_extent(x, y)

    def _eye_mask(self, x, y):
        m = np.zeros(np.shape(x), bool)
        for sx in (-1, 1):
            m |= (((x - sx * _EYE_X) / (0.080 * FACE_WIDTH)) ** 2
                  + ((y - _EYE_Y) / (0.045 * FACE_HEIGHT)) ** 2) <= 1.0
        return m

    def render_frame(self, idx: int) -> np.ndarray:
        z = self.z[idx]
        frame = self.bg.copy()
        xr, yr = self.rays(*np.meshgrid(np.arange(self.size, dtype=np.float64),
                                        np.arange(self.size, dtype=np.float64)))
        x, y = xr * z, yr * z
        on = self.on_plane(x, y)
        rgb = self.chart.sample(x, y)
        if self.eye_cutouts:
            ze = z + _EYE_RECESS
            xe, ye = xr * ze, yr * ze
            eyes = on & self._eye_mask(xe, ye)
            rgb[eyes] = self.person.sample(xe[eyes], ye[eyes])
        frame[on] = rgb[on]
        return frame

    def map_pixels(self, i: int, j: int, xs_px, ys_px):
        zi, zj = self.z[i], self.z[j]
        xr, yr = self.rays(xs_px, ys_px)
        x, y = xr * zi, yr * zi
        on = self.on_plane(x, y)
        if self.eye_cutouts:
            xe, ye = xr * (zi + _EYE_RECESS), yr * (zi + _EYE_RECESS)
            eyes = on & self._eye_mask(xe, ye)
            pxe, pye = self.project(xe, ye, zj + _EYE_RECESS)
        px, py = self.project(x, y, zj)
        out_x = np.where(on, px, xs_px)
        out_y = np.where(on, py, ys_px)
        if self.eye_cutouts:
            out_x = np.where(eyes, pxe, out_x)
            out_y = np.where(eyes, pye, out_y)
        xj, yj = (out_x - self.c) / self.f * zj, (out_y - self.c) / self.f * zj
        covered_j = self.on_plane(xj, yj)
        valid = on | ~covered_j
        return out_x, out_y, valid

    def frame_meta(self, idx: int):
        z = self.z[idx]
        return self.face_box(z), self.keypoints(z), FACE_HEIGHT / z


class _PrintedPhotoScene(_PlaneScene):
    pass


class _ScreenPhotoScene(_PlaneScene):
    def __init__(self, spec: SceneSpec):
        super().__init__(spec)
        self.overlay = _overlay_pattern(spec, self.size)[..., None]

    def _finish_chart(self, rgb, xs, ys, rng):
        rgb = _screen_tone(rgb)
        # bezel band at the screen border
        half = _PAPER_SIZE / 2
        bez = (np.maximum(np.abs(xs), np.abs(ys)) >= half * 0.94)
        rgb[bez] = [0.08, 0.08, 0.09]
        return rgb

    def render_frame(self, idx: int) -> np.ndarray:
        frame = super().render_frame(idx)
        return np.clip(frame + self.overlay, 0.0, 1.0)


class _PrintedMaskScene(_PlaneScene):
    face_shaped = True
    eye_cutouts = True


class _DisplayScene(_SceneModel):
    """Static screen replaying a rendered sequence, mapped 1:1 to camera."""

    def __init__(self, spec: SceneSpec):
        super().__init__(spec)
        self.inner = self._make_inner()
        self.overlay = _overlay_pattern(spec, self.size)[..., None]

    def _make_inner(self) -> _RealScene:
        raise NotImplementedError

    def render_frame(self, idx: int) -> np.ndarray:
        inner = self.inner.render_frame(self._inner_index(idx))
        return np.clip(_screen_tone(inner) + self.overlay, 0.0, 1.0)

    def _inner_index(self, idx: int) -> int:
        return idx

    def map_pixels(self, i: int, j: int, xs_px, ys_px):
        return self.inner.map_pixels(self._inner_index(i), self._inner_index(j),
                                     xs_px, ys_px)

    def frame_meta(self, idx: int):
        return self.inner.frame_meta(self._inner_index(idx))


class _DynamicVideoScene(_DisplayScene):
    """Replayed recording that itself follows the approach protocol."""

    def _make_inner(self) -> _RealScene:
        inner_spec = SceneSpec(attack=AttackClass.REAL,
                               texture_seed=self.spec.texture_seed,
                               frames=self.spec.frames,
                               frame_size=self.spec.frame_size,
                               approach_ratio=self.spec.approach_ratio,
                               noise_sigma=0.0)
        return _RealScene(inner_spec)


class _StaticVideoScene(_DisplayScene):
    """Replayed video of an almost static face (sub-pixel sway only)."""

    def _make_inner(self) -> _RealScene:
        inner_spec = SceneSpec(attack=AttackClass.REAL,
                               texture_seed=self.spec.texture_seed,
                               frames=self.spec.frames,
                               frame_size=self.spec.frame_size,
                               approach_ratio=self.spec.approach_ratio,
                               noise_sigma=0.0)
        scene = _RealScene(inner_spec)
        scene.z = np.full(self.spec.frames, FACE_HEIGHT / _STATIC_REL)
        return scene

    def _sway(self, idx: int) -> tuple[float, float]:
        a = 0.25
        return (a * math.sin(2 * math.pi * idx / 9.0),
                a * math.cos(2 * math.pi * idx / 13.0))

    def render_frame(self, idx: int) -> np.ndarray:
        # sway shifts the displayed content by a sub-pixel offset
        dx, dy = self._sway(idx)
        inner = self.inner
        z = inner.z[idx]
        frame = inner.bg.copy()
        box = inner.face_box(z)
        pad = 6
        x0 = max(0, int(box.x) - pad)
        x1 = min(self.size, int(math.ceil(box.x + box.w)) + pad)
        y0 = max(0, int(box.y) - pad)
        y1 = min(self.size, int(math.ceil(box.y + box.h)) + pad)
        gx, gy = np.meshgrid(np.arange(x0, x1, dtype=np.float64),
                             np.arange(y0, y1, dtype=np.float64))
        x, y, _ = inner.surface_coords(gx - dx, gy - dy, z)
        inside = inner._footprint(x, y)
        rgb = inner.chart.sample(x, y)
        sub = frame[y0:y1, x0:x1]
        sub[inside] = rgb[inside]
        return np.clip(_screen_tone(frame) + self.overlay, 0.0, 1.0)

    def map_pixels(self, i: int, j: int, xs_px, ys_px):
        dxi, dyi = self._sway(i)
        dxj, dyj = self._sway(j)
        inner = self.inner
        z = inner.z[i]
        x, y, _ = inner.surface_coords(np.asarray(xs_px, float) - dxi,
                                       np.asarray(ys_px, float) - dyi, z)
        on = inner._footprint(x, y)
        out_x = np.where(on, xs_px + (dxj - dxi), xs_px)
        out_y = np.where(on, ys_px + (dyj - dyi), ys_px)
        return out_x, out_y, np.ones_like(np.asarray(xs_px, float), bool)

    def frame_meta(self, idx: int):
        z = self.inner.z[idx]
        dx, dy = self._sway(idx)
        box = self.face_box(z)
        box = FaceBox(box.x + dx, box.y + dy, box.w, box.h)
        kp = self.keypoints(z)
        kp = KeyPoints(**{name: (p[0] + dx, p[1] + dy)
                          for name, p in zip(
                              ("left_eye", "right_eye", "nose", "mouth_left", "mouth_right"),
                              kp.as_array())})
        return box, kp, FACE_HEIGHT / z


_SCENE_TYPES = {
    AttackClass.REAL: _RealScene,
    AttackClass.PRINTED_PHOTO: _PrintedPhotoScene,
    AttackClass.SCREEN_PHOTO: _ScreenPhotoScene,
    AttackClass.PRINTED_MASK: _PrintedMaskScene,
    AttackClass.DYNAMIC_VIDEO: _DynamicVideoScene,
    AttackClass.STATIC_VIDEO: _StaticVideoScene,
}


@dataclass
class RenderedSequence:
    """Frames plus per-frame annotations and the analytic scene handle."""

    frames: list[ImageBuffer]
    boxes: list[FaceBox]
    keypoints: list[KeyPoints]
    rel_heights: list[float]
    label: AttackClass
    spec: SceneSpec | None = None
    seq_id: str = ""
    scene: "_SceneModel | None" = dc_field(default=None, repr=False)

    @property
    def frame_size(self) -> int:
        return self.frames[0].height

    def __len__(self) -> int:
        return len(self.frames)


def render(spec: SceneSpec) -> RenderedSequence:
    """Render one recording with annotations and sensor noise."""
    scene = _SCENE_TYPES[spec.attack](spec)
    frames, boxes, kps, rels = [], [], [], []
    for idx in range(spec.frames):
        raw = scene.render_frame(idx)
        if spec.noise_sigma > 0:
            rng = np.random.default_rng(
                np.random.SeedSequence([spec.texture_seed, 29, idx]))
            raw = raw + rng.normal(0.0, spec.noise_sigma, raw.shape)
        frames.append(ImageBuffer(np.clip(raw, 0.0, 1.0)))
        box, kp, rel = scene.frame_meta(idx)
        boxes.append(box)
        kps.append(kp)
        rels.append(rel)
    return RenderedSequence(frames=frames, boxes=boxes, keypoints=kps,
                            rel_heights=rels, label=spec.attack, spec=spec,
                            scene=scene)


def _preprocess_transform(seq: RenderedSequence, idx: int) -> Transform2D:
    """Frame-to-crop transform the preprocessing applies to frame idx."""
    from ..geometry import CROP_SIZE, DEFAULT_MARGIN
    t_align = rigid_align_transform(seq.keypoints[idx], seq.frame_size,
                                    seq.frame_size)
    box = seq.boxes[idx].transformed_center(t_align)
    t_crop, side = crop_transform(box, DEFAULT_MARGIN)
    scale = (CROP_SIZE - 1) / (side - 1)
    return t_align.then(t_crop).then(Transform2D.scaling(scale))


def ground_truth_flow(seq: RenderedSequence, i: int, j: int,
                      after_preprocess: bool = False
                      ) -> tuple[FlowField, np.ndarray]:
    """Exact flow from frame i to frame j, plus an occlusion validity mask.

    With after_preprocess the flow is expressed between the aligned,
    cropped, resized versions of the two frames (the pair the solver
    actually sees) on the crop grid.
    """
    if seq.scene is None:
        raise SimulatorError("sequence has no scene handle (loaded from disk?)")
    n = len(seq)
    if not (0 <= i < n and 0 <= j < n):
        raise SimulatorError(f"frame indices ({i}, {j}) outside 0..{n - 1}")

    if not after_preprocess:
        size = seq.frame_size
        gx, gy = np.meshgrid(np.arange(size, dtype=np.float64),
                             np.arange(size, dtype=np.float64))
        out_x, out_y, valid = seq.scene.map_pixels(i, j, gx, gy)
        return FlowField((out_x - gx).astype(np.float32),
                         (out_y - gy).astype(np.float32)), valid

    from ..geometry import CROP_SIZE
    t_i = _preprocess_transform(seq, i)
    t_j = _preprocess_transform(seq, j)
    gx, gy = np.meshgrid(np.arange(CROP_SIZE, dtype=np.float64),
                         np.arange(CROP_SIZE, dtype=np.float64))
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    frame_pts = t_i.inverse().apply(pts)
    fx = frame_pts[:, 0].reshape(gx.shape)
    fy = frame_pts[:, 1].reshape(gy.shape)
    out_x, out_y, valid = seq.scene.map_pixels(i, j, fx, fy)
    crop_pts = t_j.apply(np.stack([np.asarray(out_x).ravel(),
                                   np.asarray(out_y).ravel()], axis=1))
    qx = crop_pts[:, 0].reshape(gx.shape)
    qy = crop_pts[:, 1].reshape(gy.shape)
    size = seq.frame_size
    in_frame = (fx >= 0) & (fx <= size - 1) & (fy >= 0) & (fy <= size - 1)
    return FlowField((qx - gx).astype(np.float32),
                     (qy - gy).astype(np.float32)), valid & in_frame
