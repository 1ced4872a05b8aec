"""Flow fields, magnitude maps, solver configuration, expansion fitting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..imaging import resample_plane

__all__ = ["FlowField", "MagnitudeMap", "FlowConfig", "FlowError",
           "magnitude", "clip_magnitude", "resample_field",
           "ExpansionFit", "fit_expansion"]

CLIP_FRACTION = 0.2


class FlowError(ValueError):
    """Invalid flow data or configuration."""


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement (u right, v down) in pixels, float32."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float32)
        v = np.ascontiguousarray(self.v, dtype=np.float32)
        if u.ndim != 2 or u.shape != v.shape:
            raise FlowError(f"u/v must be matching 2-D arrays, got {u.shape} vs {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise FlowError("flow must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls(np.zeros((height, width), np.float32),
                   np.zeros((height, width), np.float32))


@dataclass(frozen=True)
class MagnitudeMap:
    """Per-pixel nonnegative displacement distance in pixels."""

    m: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.m, dtype=np.float32)
        if m.ndim != 2:
            raise FlowError(f"magnitude must be 2-D, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise FlowError("magnitude must be finite")
        if m.size and float(m.min()) < 0:
            raise FlowError("magnitude must be nonnegative")
        object.__setattr__(self, "m", m)

    @property
    def width(self) -> int:
        return self.m.shape[1]

    @property
    def height(self) -> int:
        return self.m.shape[0]


@dataclass(frozen=True)
class FlowConfig:
    """Knobs of the coarse-to-fine variational solver.

    resolution is the pipeline-level operating size: crops are resampled
    to resolution x resolution before solving and the field is mapped
    back to crop scale. The solver itself runs at its input dims.
    """

    resolution: int = 256
    refine_iters: int = 3
    inner_iters: int = 60
    alpha: float = 0.1
    pyramid_scale: float = 0.5
    min_level_size: int = 16

    def __post_init__(self):
        if not (64 <= self.resolution <= 1024):
            raise FlowError(f"resolution {self.resolution} outside [64, 1024]")
        if self.refine_iters < 1 or self.inner_iters < 1:
            raise FlowError("iteration counts must be positive")
        if self.alpha <= 0:
            raise FlowError("alpha must be positive")
        if not (0.0 < self.pyramid_scale < 1.0):
            raise FlowError("pyramid_scale must be in (0, 1)")
        if self.min_level_size < 4:
            raise FlowError("min_level_size must be >= 4")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict | str | Path) -> "FlowConfig":
        if not isinstance(obj, dict):
            obj = json.loads(Path(obj).read_text())
        return cls(**obj)


def magnitude(f: FlowField) -> MagnitudeMap:
    """Euclidean displacement distance per pixel."""
    u = f.u.astype(np.float64)
    v = f.v.astype(np.float64)
    return MagnitudeMap(np.sqrt(u * u + v * v))


def clip_magnitude(m: MagnitudeMap, crop_side: float) -> MagnitudeMap:
    """Saturate at 20% of the crop side (51.2 px for 256 crops)."""
    if crop_side <= 0:
        raise FlowError(f"nonpositive crop side {crop_side}")
    return MagnitudeMap(np.minimum(m.m, np.float32(CLIP_FRACTION * crop_side)))


def resample_field(f: FlowField, out_w: int, out_h: int,
                   scale_values: float | None = None) -> FlowField:
    """Resize the field; vector values scale with the size ratio by default."""
    if scale_values is None:
        scale_values = (out_w - 1) / max(f.width - 1, 1)
    u = resample_plane(f.u.astype(np.float64), out_w, out_h) * scale_values
    v = resample_plane(f.v.astype(np.float64), out_w, out_h) * scale_values
    return FlowField(u.astype(np.float32), v.astype(np.float32))


@dataclass(frozen=True)
class ExpansionFit:
    """Least-squares radial expansion u = s*(x-cx)+tx, v = s*(y-cy)+ty."""

    scale: float
    tx: float
    ty: float
    residual_rms: float
    flow_rms: float

    @property
    def zoom(self) -> float:
        """Zoom factor the fitted expansion corresponds to."""
        return 1.0 + self.scale

    @property
    def explained_energy(self) -> float:
        """Fraction of flow energy captured by the expansion model."""
        if self.flow_rms <= 0:
            return 1.0
        return 1.0 - (self.residual_rms / self.flow_rms) ** 2


def fit_expansion(f: FlowField, mask: np.ndarray | None = None,
                  center: tuple[float, float] | None = None) -> ExpansionFit:
    """Fit a global radial expansion about the field center.

    mask selects the pixels entering the fit; residual_rms is the RMS
    endpoint error of the model over those pixels.
    """
    h, w = f.u.shape
    if center is None:
        center = ((w - 1) / 2.0, (h - 1) / 2.0)
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64) - center[0],
                         np.arange(h, dtype=np.float64) - center[1])
    u = f.u.astype(np.float64)
    v = f.v.astype(np.float64)
    if mask is not None:
        if mask.shape != (h, w):
            raise FlowError(f"mask shape {mask.shape} does not match field {(h, w)}")
        sel = mask.astype(bool)
        if not sel.any():
            raise FlowError("empty fit mask")
        gx, gy, u, v = gx[sel], gy[sel], u[sel], v[sel]
    gx, gy, u, v = (a.ravel() for a in (gx, gy, u, v))
    n = float(u.size)

    # Normal equations for theta = (s, tx, ty) over rows
    # [dx 1 0] -> u and [dy 0 1] -> v.
    sxx = float(gx @ gx + gy @ gy)
    a = np.array([[sxx, gx.sum(), gy.sum()],
                  [gx.sum(), n, 0.0],
                  [gy.sum(), 0.0, n]])
    b = np.array([float(gx @ u + gy @ v), u.sum(), v.sum()])
    try:
        s, tx, ty = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        s, tx, ty = 0.0, float(u.mean()), float(v.mean())
    ru = u - (s * gx + tx)
    rv = v - (s * gy + ty)
    residual = float(np.sqrt(np.mean(ru * ru + rv * rv)))
    flow_rms = float(np.sqrt(np.mean(u * u + v * v)))
    return ExpansionFit(scale=float(s), tx=float(tx), ty=float(ty),
                        residual_rms=residual, flow_rms=flow_rms)
