# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels of the variational flow solver.

Kept arithmetically in lockstep with _kernels_py so the import-time
backend choice never changes results beyond float noise.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"

cdef double W_CROSS = 1.0 / 6.0
cdef double W_DIAG = 1.0 / 12.0


cdef inline Py_ssize_t _clamp(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        return 0
    if i >= n:
        return n - 1
    return i


cdef void _hs_average(double[:, ::1] a, double[:, ::1] out) nogil:
    cdef Py_ssize_t h = a.shape[0]
    cdef Py_ssize_t w = a.shape[1]
    cdef Py_ssize_t y, x, ym, yp, xm, xp
    cdef double cross, diag
    for y in range(h):
        ym = _clamp(y - 1, h)
        yp = _clamp(y + 1, h)
        for x in range(w):
            xm = _clamp(x - 1, w)
            xp = _clamp(x + 1, w)
            cross = (a[y, xm] + a[y, xp]) + (a[ym, x] + a[yp, x])
            diag = (a[ym, xm] + a[ym, xp]) + (a[yp, xm] + a[yp, xp])
            out[y, x] = cross * W_CROSS + diag * W_DIAG


def jacobi_sweeps(cnp.ndarray[double, ndim=2] ix,
                  cnp.ndarray[double, ndim=2] iy,
                  cnp.ndarray[double, ndim=2] it,
                  double alpha2, int iters):
    """Jacobi iterations for the flow increment; see the pure twin."""
    cdef Py_ssize_t h = ix.shape[0]
    cdef Py_ssize_t w = ix.shape[1]
    du_arr = np.zeros((h, w), dtype=np.float64)
    dv_arr = np.zeros((h, w), dtype=np.float64)
    dua_arr = np.empty((h, w), dtype=np.float64)
    dva_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] du = du_arr
    cdef double[:, ::1] dv = dv_arr
    cdef double[:, ::1] dua = dua_arr
    cdef double[:, ::1] dva = dva_arr
    cdef double[:, ::1] vix = np.ascontiguousarray(ix)
    cdef double[:, ::1] viy = np.ascontiguousarray(iy)
    cdef double[:, ::1] vit = np.ascontiguousarray(it)
    cdef Py_ssize_t y, x
    cdef int k
    cdef double t, denom
    with nogil:
        for k in range(iters):
            _hs_average(du, dua)
            _hs_average(dv, dva)
            for y in range(h):
                for x in range(w):
                    denom = alpha2 + vix[y, x] * vix[y, x] + viy[y, x] * viy[y, x]
                    t = (vix[y, x] * dua[y, x] + viy[y, x] * dva[y, x] + vit[y, x]) / denom
                    du[y, x] = dua[y, x] - vix[y, x] * t
                    dv[y, x] = dva[y, x] - viy[y, x] * t
    return du_arr, dv_arr


def warp_backward(cnp.ndarray[double, ndim=2] img,
                  cnp.ndarray[double, ndim=2] u,
                  cnp.ndarray[double, ndim=2] v):
    """Sample img at (x + u, y + v), bilinear, edge-clamped."""
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] vimg = np.ascontiguousarray(img)
    cdef double[:, ::1] vu = np.ascontiguousarray(u)
    cdef double[:, ::1] vv = np.ascontiguousarray(v)
    cdef Py_ssize_t y, x, x0, y0, x1, y1
    cdef double xs, ys, fx, fy, top, bot
    with nogil:
        for y in range(h):
            for x in range(w):
                xs = x + vu[y, x]
                ys = y + vv[y, x]
                if xs < 0.0:
                    xs = 0.0
                elif xs > w - 1.0:
                    xs = w - 1.0
                if ys < 0.0:
                    ys = 0.0
                elif ys > h - 1.0:
                    ys = h - 1.0
                x0 = <Py_ssize_t> xs
                y0 = <Py_ssize_t> ys
                x1 = x0 + 1
                if x1 >= w:
                    x1 = w - 1
                y1 = y0 + 1
                if y1 >= h:
                    y1 = h - 1
                fx = xs - x0
                fy = ys - y0
                top = vimg[y0, x0] * (1.0 - fx) + vimg[y0, x1] * fx
                bot = vimg[y1, x0] * (1.0 - fx) + vimg[y1, x1] * fx
                out[y, x] = top * (1.0 - fy) + bot * fy
    return out_arr
