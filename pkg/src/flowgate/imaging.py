"""Image buffers and the resampling / warping / blur primitives.

All images are intensity-normalized to [0, 1] and immutable once built.
Sampling convention, fixed here and used by every module: pixel centers
sit at integer coordinates, so a w-pixel row spans the continuous
interval [0, w-1] and resizing maps that span linearly onto the target
span (endpoints map to endpoints). Out-of-bounds reads replicate the
nearest edge pixel.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "ImageBuffer",
    "Transform2D",
    "ImagingError",
    "resize",
    "warp",
    "gaussian_blur",
    "sigma_for_kernel",
    "gaussian_kernel",
    "read_image",
    "write_image",
]

# Constructor tolerance for float round-off outside [0, 1]; anything worse
# is a real range violation and rejected.
_RANGE_SLACK = 1e-6

_LUMA = np.array([0.299, 0.587, 0.114])


class ImagingError(ValueError):
    """Invalid image data or transform."""


class ImageBuffer:
    """2-D raster of gray or RGB samples in [0, 1], row-major, immutable."""

    __slots__ = ("_samples",)

    def __init__(self, samples: np.ndarray):
        arr = np.asarray(samples, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ImagingError(f"expected (h, w) or (h, w, 1|3) samples, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImagingError(f"degenerate image dims {arr.shape[1]}x{arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise ImagingError("image samples must be finite")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < -_RANGE_SLACK or hi > 1.0 + _RANGE_SLACK:
            raise ImagingError(f"samples outside [0,1]: min={lo:.6g} max={hi:.6g}")
        if lo < 0.0 or hi > 1.0:
            arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        self._samples = arr

    @property
    def samples(self) -> np.ndarray:
        """(height, width, channels) float64 view, read-only."""
        return self._samples

    @property
    def width(self) -> int:
        return self._samples.shape[1]

    @property
    def height(self) -> int:
        return self._samples.shape[0]

    @property
    def channels(self) -> int:
        return self._samples.shape[2]

    def plane(self, c: int = 0) -> np.ndarray:
        """Single channel as a (h, w) array."""
        return self._samples[:, :, c]

    def gray(self) -> np.ndarray:
        """Luminance as (h, w) float64 (Rec. 601 weights for RGB)."""
        if self.channels == 1:
            return self._samples[:, :, 0]
        return self._samples @ _LUMA

    @classmethod
    def constant(cls, width: int, height: int, value: float = 0.0, channels: int = 1) -> "ImageBuffer":
        return cls(np.full((height, width, channels), value, dtype=np.float64))

    def __eq__(self, other) -> bool:
        return isinstance(other, ImageBuffer) and np.array_equal(self._samples, other._samples)

    def __repr__(self) -> str:
        return f"ImageBuffer({self.width}x{self.height}x{self.channels})"


class Transform2D:
    """3x3 homogeneous transform in pixel units (x right, y down)."""

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray):
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ImagingError(f"transform must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ImagingError("transform must be finite")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise ImagingError("singular transform")
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def identity(cls) -> "Transform2D":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "Transform2D":
        m = np.eye(3)
        m[0, 2] = tx
        m[1, 2] = ty
        return cls(m)

    @classmethod
    def rotation(cls, angle_rad: float, center: tuple[float, float] = (0.0, 0.0)) -> "Transform2D":
        """Rotate points by angle_rad about center ((x, y-down) axes)."""
        c, s = math.cos(angle_rad), math.sin(angle_rad)
        cx, cy = center
        m = np.array([
            [c, -s, cx - c * cx + s * cy],
            [s, c, cy - s * cx - c * cy],
            [0.0, 0.0, 1.0],
        ])
        return cls(m)

    @classmethod
    def scaling(cls, sx: float, sy: float | None = None,
                center: tuple[float, float] = (0.0, 0.0)) -> "Transform2D":
        sy = sx if sy is None else sy
        cx, cy = center
        m = np.array([
            [sx, 0.0, cx - sx * cx],
            [0.0, sy, cy - sy * cy],
            [0.0, 0.0, 1.0],
        ])
        return cls(m)

    @classmethod
    def from_points(cls, src: np.ndarray, dst: np.ndarray) -> "Transform2D":
        """Homography mapping 4 src points onto 4 dst points (DLT, exact)."""
        src = np.asarray(src, dtype=np.float64)
        dst = np.asarray(dst, dtype=np.float64)
        if src.shape != (4, 2) or dst.shape != (4, 2):
            raise ImagingError("from_points needs 4 source and 4 destination points")
        a = np.zeros((8, 8))
        b = np.zeros(8)
        for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
            a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
            a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
            b[2 * i] = u
            b[2 * i + 1] = v
        try:
            h = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise ImagingError(f"degenerate point configuration: {exc}") from exc
        return cls(np.append(h, 1.0).reshape(3, 3))

    def then(self, other: "Transform2D") -> "Transform2D":
        """Composition applying self first, then other."""
        return Transform2D(other.matrix @ self.matrix)

    def inverse(self) -> "Transform2D":
        return Transform2D(np.linalg.inv(self.matrix))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 2) points; homogeneous divide for perspective members."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ones = np.ones((pts.shape[0], 1))
        h = np.hstack([pts, ones]) @ self.matrix.T
        return h[:, :2] / h[:, 2:3]

    def is_affine(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix[2], [0.0, 0.0, 1.0], atol=tol))

    def __repr__(self) -> str:
        return f"Transform2D({self.matrix.tolist()})"


def sample_plane(plane: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear sample of a (h, w) plane at float coords, edge-replicated."""
    h, w = plane.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = plane[y0, x0] * (1.0 - fx) + plane[y0, x1] * fx
    bot = plane[y1, x0] * (1.0 - fx) + plane[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def _sample_image(samples: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    out = np.empty(xs.shape + (samples.shape[2],))
    for c in range(samples.shape[2]):
        out[..., c] = sample_plane(samples[:, :, c], xs, ys)
    return out


def resample_plane(plane: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize of a raw (h, w) array under the fixed convention."""
    h, w = plane.shape
    xs = _axis_coords(w, out_w)
    ys = _axis_coords(h, out_h)
    return sample_plane(plane, *np.meshgrid(xs, ys))


def _axis_coords(in_n: int, out_n: int) -> np.ndarray:
    if out_n == 1:
        return np.array([(in_n - 1) / 2.0])
    return np.arange(out_n) * ((in_n - 1) / (out_n - 1))


def resize(img: ImageBuffer, w: int, h: int) -> ImageBuffer:
    """Bilinear resample to exactly (w, h); endpoints map to endpoints.

    A size-1 target axis samples the source-axis midpoint.
    """
    if w < 1 or h < 1:
        raise ImagingError(f"degenerate target dims {w}x{h}")
    if w == img.width and h == img.height:
        return ImageBuffer(img.samples)
    xs = _axis_coords(img.width, w)
    ys = _axis_coords(img.height, h)
    gx, gy = np.meshgrid(xs, ys)
    return ImageBuffer(_sample_image(img.samples, gx, gy))


def warp(img: ImageBuffer, t: Transform2D, out_w: int, out_h: int) -> ImageBuffer:
    """Inverse-mapped bilinear warp; t maps input coords to output coords."""
    if out_w < 1 or out_h < 1:
        raise ImagingError(f"degenerate output dims {out_w}x{out_h}")
    inv = t.inverse().matrix
    gx, gy = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    denom = inv[2, 0] * gx + inv[2, 1] * gy + inv[2, 2]
    sx = (inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]) / denom
    sy = (inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]) / denom
    return ImageBuffer(_sample_image(img.samples, sx, sy))


def sigma_for_kernel(kernel_px: int) -> float:
    """Fixed kernel-size to sigma rule so blur levels are reproducible."""
    return 0.3 * ((kernel_px - 1) * 0.5 - 1.0) + 0.8


def gaussian_kernel(kernel_px: int) -> np.ndarray:
    """1-D Gaussian taps for an odd kernel size, normalized to sum 1."""
    if kernel_px < 1 or kernel_px % 2 == 0:
        raise ImagingError(f"kernel size must be odd and positive, got {kernel_px}")
    if kernel_px == 1:
        return np.array([1.0])
    sigma = sigma_for_kernel(kernel_px)
    r = kernel_px // 2
    taps = np.exp(-np.arange(-r, r + 1, dtype=np.float64) ** 2 / (2.0 * sigma * sigma))
    return taps / taps.sum()


def blur_plane(plane: np.ndarray, kernel_px: int) -> np.ndarray:
    """Separable Gaussian blur of a raw (h, w) array, edge-replicated."""
    k = gaussian_kernel(kernel_px)
    if k.size == 1:
        return plane.copy()
    r = k.size // 2
    padded = np.pad(plane, ((r, r), (r, r)), mode="edge")
    tmp = np.zeros((plane.shape[0], padded.shape[1]))
    for i, wgt in enumerate(k):
        tmp += wgt * padded[i:i + plane.shape[0], :]
    out = np.zeros(plane.shape)
    for i, wgt in enumerate(k):
        out += wgt * tmp[:, i:i + plane.shape[1]]
    return out


def gaussian_blur(img: ImageBuffer, kernel_px: int) -> ImageBuffer:
    """Gaussian blur with the documented sigma-from-kernel rule."""
    planes = [blur_plane(img.plane(c), kernel_px) for c in range(img.channels)]
    return ImageBuffer(np.stack(planes, axis=-1))


# ---------------------------------------------------------------------------
# File I/O: 8-bit PNG and binary PPM/PGM, linear [0,1] <-> [0,255].


def read_image(path: str | Path) -> ImageBuffer:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    with Image.open(path) as im:
        if im.mode in ("1", "L", "I;16", "I", "P") and "transparency" not in im.info:
            im = im.convert("L")
            arr = np.asarray(im, dtype=np.float64)[:, :, None]
        else:
            im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64)
    return ImageBuffer(arr / 255.0)


def write_image(img: ImageBuffer, path: str | Path) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".ppm", ".pgm"):
        raise ImagingError(f"unsupported image format {suffix!r}")
    arr = np.rint(img.samples * 255.0).astype(np.uint8)
    if suffix == ".pgm" and img.channels == 3:
        arr = np.rint(img.gray() * 255.0).astype(np.uint8)[:, :, None]
    if arr.shape[2] == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    if suffix == ".ppm" and img.channels == 1:
        pil = pil.convert("RGB")
    pil.save(path)
