"""Pure-numpy fallback for the solver hot kernels.

Arithmetic mirrors the compiled extension term for term so both
backends produce matching fields.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"

_W_CROSS = 1.0 / 6.0
_W_DIAG = 1.0 / 12.0


def _hs_average(a: np.ndarray) -> np.ndarray:
    """Weighted 8-neighbor average (edge replicated) used by the sweeps."""
    p = np.pad(a, 1, mode="edge")
    cross = (p[1:-1, :-2] + p[1:-1, 2:]) + (p[:-2, 1:-1] + p[2:, 1:-1])
    diag = (p[:-2, :-2] + p[:-2, 2:]) + (p[2:, :-2] + p[2:, 2:])
    return cross * _W_CROSS + diag * _W_DIAG


def jacobi_sweeps(ix: np.ndarray, iy: np.ndarray, it: np.ndarray,
                  alpha2: float, iters: int) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi iterations of the regularized normal equations.

    Solves for the flow increment (du, dv) of the linearized brightness
    constancy ix*du + iy*dv + it = 0 with smoothness weight sqrt(alpha2),
    starting from zero.
    """
    denom = alpha2 + ix * ix + iy * iy
    du = np.zeros_like(ix)
    dv = np.zeros_like(ix)
    for _ in range(iters):
        dua = _hs_average(du)
        dva = _hs_average(dv)
        t = (ix * dua + iy * dva + it) / denom
        du = dua - ix * t
        dv = dva - iy * t
    return du, dv


def warp_backward(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample img at (x + u, y + v), bilinear, edge-clamped."""
    h, w = img.shape
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    xs = np.clip(gx + u, 0.0, w - 1.0)
    ys = np.clip(gy + v, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy
