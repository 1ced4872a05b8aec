"""Coarse-to-fine variational (Horn-Schunck) dense flow solver.

Per pyramid level the current flow warps the second image toward the
first, brightness constancy is linearized around that warp, and the
regularized normal equations are relaxed by Jacobi sweeps; increments
accumulate into the flow, which doubles when moving to the next finer
level. The backend boundary (two crops in, field out) lets an external
estimator replace this solver without touching callers.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from ..imaging import ImageBuffer, blur_plane, resample_plane
from . import kernels
from .field import FlowConfig, FlowError, FlowField

__all__ = ["FlowBackend", "VariationalBackend", "estimate_flow",
           "get_default_backend", "set_default_backend"]

# Input presmoothing before pyramid construction; mild and fixed.
_PRESMOOTH_KERNEL = 5
# Anti-alias blur before each 2x downsample.
_PYRAMID_KERNEL = 5
# Pyramid never descends below 1/8 of the input side: coarser levels no
# longer resolve part-scale structure and couple boundary occlusions
# into the interior.
_MAX_RELATIVE_DEPTH = 8


@runtime_checkable
class FlowBackend(Protocol):
    """Anything that maps two same-sized crops to a dense flow field."""

    name: str

    def estimate(self, a: ImageBuffer, b: ImageBuffer, cfg: FlowConfig) -> FlowField:
        ...


def _pyramid(plane: np.ndarray, cfg: FlowConfig) -> list[np.ndarray]:
    """Fine-to-coarse image pyramid down to the effective level floor."""
    floor = max(cfg.min_level_size, min(plane.shape) // _MAX_RELATIVE_DEPTH)
    levels = [plane]
    while True:
        h, w = levels[-1].shape
        nw = int(round(w * cfg.pyramid_scale))
        nh = int(round(h * cfg.pyramid_scale))
        if min(nw, nh) < floor:
            break
        levels.append(resample_plane(blur_plane(levels[-1], _PYRAMID_KERNEL), nw, nh))
    return levels


class VariationalBackend:
    """The built-in coarse-to-fine Horn-Schunck solver."""

    name = "variational"

    def __init__(self, kernel_backend: str | None = None):
        self._kernels = kernels.get_kernels(kernel_backend)

    @property
    def kernel_backend(self) -> str:
        return self._kernels.BACKEND

    def estimate(self, a: ImageBuffer, b: ImageBuffer, cfg: FlowConfig) -> FlowField:
        if (a.width, a.height) != (b.width, b.height):
            raise FlowError(
                f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}")
        if min(a.width, a.height) < cfg.min_level_size:
            raise FlowError(
                f"inputs smaller than min_level_size={cfg.min_level_size}")

        ga = blur_plane(a.gray(), _PRESMOOTH_KERNEL)
        gb = blur_plane(b.gray(), _PRESMOOTH_KERNEL)
        pyr_a = _pyramid(ga, cfg)
        pyr_b = _pyramid(gb, cfg)

        ker = self._kernels
        alpha2 = cfg.alpha * cfg.alpha
        u = np.zeros_like(pyr_a[-1])
        v = np.zeros_like(pyr_a[-1])
        for level in range(len(pyr_a) - 1, -1, -1):
            la, lb = pyr_a[level], pyr_b[level]
            if u.shape != la.shape:
                # Coarse-to-fine hand-off: exact doubling of the vectors.
                u = resample_plane(u, la.shape[1], la.shape[0]) * 2.0
                v = resample_plane(v, la.shape[1], la.shape[0]) * 2.0
            for _ in range(cfg.refine_iters):
                bw = ker.warp_backward(lb, u, v)
                avg = 0.5 * (la + bw)
                iy, ix = np.gradient(avg)
                it = bw - la
                du, dv = ker.jacobi_sweeps(ix, iy, it, alpha2, cfg.inner_iters)
                u = u + du
                v = v + dv
        return FlowField(u.astype(np.float32), v.astype(np.float32))


_default_backend: FlowBackend = VariationalBackend()


def get_default_backend() -> FlowBackend:
    return _default_backend


def set_default_backend(backend: FlowBackend) -> None:
    global _default_backend
    _default_backend = backend


def estimate_flow(a: ImageBuffer, b: ImageBuffer, cfg: FlowConfig | None = None,
                  backend: FlowBackend | None = None) -> FlowField:
    """Dense flow from a to b at the inputs' native dims."""
    cfg = cfg or FlowConfig()
    backend = backend or _default_backend
    return backend.estimate(a, b, cfg)
