# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled depth-system kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _grad_at(const double[:, ::1] z, const double[:, ::1] ex,
                          const double[:, ::1] ey, Py_ssize_t y, Py_ssize_t x,
                          double *g) noexcept nogil:
    cdef Py_ssize_t h = z.shape[0], w = z.shape[1]
    g[0] = (z[y, x + 1] - z[y, x]) * ex[y, x] if x + 1 < w else 0.0
    g[1] = (z[y + 1, x] - z[y, x]) * ey[y, x] if y + 1 < h else 0.0
    g[2] = z[y, x]


cdef void _grad_t(const double[:, :, ::1] hbuf, const double[:, ::1] ex,
                  const double[:, ::1] ey, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t h = out.shape[0], w = out.shape[1], y, x
    cdef double gx, gy
    for y in range(h):
        for x in range(w):
            out[y, x] = hbuf[y, x, 2]
    for y in range(h):
        for x in range(w):
            gx = hbuf[y, x, 0] * ex[y, x]
            gy = hbuf[y, x, 1] * ey[y, x]
            out[y, x] -= gx + gy
            if x + 1 < w:
                out[y, x + 1] += gx
            if y + 1 < h:
                out[y + 1, x] += gy


def apply_normal(const double[:, ::1] z, const double[:, :, :, ::1] coef,
                 const double[:, ::1] ex, const double[:, ::1] ey):
    cdef Py_ssize_t h = z.shape[0], w = z.shape[1], m = coef.shape[2]
    cdef Py_ssize_t y, x, k
    cdef double g[3]
    cdef double u, h0, h1, h2
    cdef const double *c
    hbuf_arr = np.empty((h, w, 3), dtype=np.float64)
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, :, ::1] hbuf = hbuf_arr
    cdef double[:, ::1] out = out_arr
    with nogil:
        for y in range(h):
            for x in range(w):
                _grad_at(z, ex, ey, y, x, g)
                h0 = 0.0
                h1 = 0.0
                h2 = 0.0
                c = &coef[y, x, 0, 0]
                for k in range(m):
                    u = c[3 * k] * g[0] + c[3 * k + 1] * g[1] + c[3 * k + 2] * g[2]
                    h0 += c[3 * k] * u
                    h1 += c[3 * k + 1] * u
                    h2 += c[3 * k + 2] * u
                hbuf[y, x, 0] = h0
                hbuf[y, x, 1] = h1
                hbuf[y, x, 2] = h2
        _grad_t(hbuf, ex, ey, out)
    return out_arr


def normal_rhs(const double[:, :, :, ::1] coef, const double[:, :, ::1] b,
               const double[:, ::1] ex, const double[:, ::1] ey):
    cdef Py_ssize_t h = coef.shape[0], w = coef.shape[1], m = coef.shape[2]
    cdef Py_ssize_t y, x, k
    cdef double h0, h1, h2, bk
    cdef const double *c
    hbuf_arr = np.empty((h, w, 3), dtype=np.float64)
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, :, ::1] hbuf = hbuf_arr
    cdef double[:, ::1] out = out_arr
    with nogil:
        for y in range(h):
            for x in range(w):
                h0 = 0.0
                h1 = 0.0
                h2 = 0.0
                c = &coef[y, x, 0, 0]
                for k in range(m):
                    bk = b[y, x, k]
                    h0 += c[3 * k] * bk
                    h1 += c[3 * k + 1] * bk
                    h2 += c[3 * k + 2] * bk
                hbuf[y, x, 0] = h0
                hbuf[y, x, 1] = h1
                hbuf[y, x, 2] = h2
        _grad_t(hbuf, ex, ey, out)
    return out_arr


def residual_sq(const double[:, ::1] z, const double[:, :, :, ::1] coef,
                const double[:, :, ::1] b, const double[:, ::1] ex,
                const double[:, ::1] ey):
    cdef Py_ssize_t h = z.shape[0], w = z.shape[1], m = coef.shape[2]
    cdef Py_ssize_t y, x, k
    cdef double g[3]
    cdef double r, acc
    cdef const double *c
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for y in range(h):
            for x in range(w):
                _grad_at(z, ex, ey, y, x, g)
                c = &coef[y, x, 0, 0]
                acc = 0.0
                for k in range(m):
                    r = c[3 * k] * g[0] + c[3 * k + 1] * g[1] + c[3 * k + 2] * g[2] - b[y, x, k]
                    acc += r * r
                out[y, x] = acc
    return out_arr


def jacobi_diag(const double[:, :, :, ::1] coef, const double[:, ::1] ex,
                const double[:, ::1] ey):
    cdef Py_ssize_t h = coef.shape[0], w = coef.shape[1], m = coef.shape[2]
    cdef Py_ssize_t y, x, k
    cdef double a, bb, t
    cdef const double *c
    out_arr = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for y in range(h):
            for x in range(w):
                c = &coef[y, x, 0, 0]
                for k in range(m):
                    a = c[3 * k] * ex[y, x]
                    bb = c[3 * k + 1] * ey[y, x]
                    t = c[3 * k + 2] - a - bb
                    out[y, x] += t * t
                    if x + 1 < w:
                        out[y, x + 1] += a * a
                    if y + 1 < h:
                        out[y + 1, x] += bb * bb
    return out_arr
