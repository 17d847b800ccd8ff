# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution/pooling kernels.

Same contracts as ``_kernels_py``; loops are ordered so that every output
element receives its contributions in the same order as the numpy version.
"""
from libc.string cimport memcpy

import numpy as np
cimport numpy as cnp

from ..errors import InternalConsistencyError

cnp.import_array()

NAME = "cython"


cdef inline void _valid_range(Py_ssize_t j, Py_ssize_t sw, Py_ssize_t pw, Py_ssize_t w,
                              Py_ssize_t out_w, Py_ssize_t *lo, Py_ssize_t *hi) noexcept nogil:
    # output columns xx with 0 <= xx*sw + j - pw < w
    cdef Py_ssize_t a = pw - j
    lo[0] = 0 if a <= 0 else (a + sw - 1) // sw
    a = w - 1 + pw - j
    hi[0] = 0 if a < 0 else a // sw + 1
    if hi[0] > out_w:
        hi[0] = out_w
    if lo[0] > hi[0]:
        lo[0] = hi[0]


def im2col(double[:, :, :, ::1] x, Py_ssize_t kh, Py_ssize_t kw,
           Py_ssize_t sh, Py_ssize_t sw, Py_ssize_t ph, Py_ssize_t pw,
           Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ncols = n * out_h * out_w
    cols_arr = np.zeros((c * kh * kw, ncols), dtype=np.float64)
    cdef double[:, ::1] cols = cols_arr
    cdef Py_ssize_t ci, i, j, b, y, xx, row, iy, lo, hi, off
    cdef double *dst
    cdef const double *src
    with nogil:
        for ci in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ci * kh + i) * kw + j
                    _valid_range(j, sw, pw, w, out_w, &lo, &hi)
                    off = j - pw
                    for b in range(n):
                        for y in range(out_h):
                            iy = y * sh + i - ph
                            if iy < 0 or iy >= h:
                                continue
                            dst = &cols[row, (b * out_h + y) * out_w]
                            src = &x[b, ci, iy, 0]
                            if sw == 1:
                                if hi > lo:
                                    memcpy(dst + lo, src + lo + off, (hi - lo) * sizeof(double))
                            else:
                                for xx in range(lo, hi):
                                    dst[xx] = src[xx * sw + off]
    return cols_arr


def col2im(double[:, ::1] cols, Py_ssize_t n, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w,
           Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t sh, Py_ssize_t sw,
           Py_ssize_t ph, Py_ssize_t pw, Py_ssize_t out_h, Py_ssize_t out_w):
    img_arr = np.zeros((n, c, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] img = img_arr
    cdef Py_ssize_t ci, i, j, b, y, xx, row, iy, lo, hi, off
    cdef double *dst
    cdef const double *src
    with nogil:
        for ci in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ci * kh + i) * kw + j
                    _valid_range(j, sw, pw, w, out_w, &lo, &hi)
                    off = j - pw
                    for b in range(n):
                        for y in range(out_h):
                            iy = y * sh + i - ph
                            if iy < 0 or iy >= h:
                                continue
                            src = &cols[row, (b * out_h + y) * out_w]
                            dst = &img[b, ci, iy, 0]
                            for xx in range(lo, hi):
                                dst[xx * sw + off] += src[xx]
    return img_arr


def maxpool_forward(double[:, :, :, ::1] x, Py_ssize_t kh, Py_ssize_t kw,
                    Py_ssize_t sh, Py_ssize_t sw, Py_ssize_t ph, Py_ssize_t pw,
                    Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    out_arr = np.empty((n, c, out_h, out_w), dtype=np.float64)
    arg_arr = np.empty((n, c, out_h, out_w), dtype=np.int64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, :, ::1] arg = arg_arr
    cdef Py_ssize_t b, ci, y, xx, i, j, iy, ix, best_idx
    cdef double best, v
    cdef double neg_inf = -np.inf
    with nogil:
        for b in range(n):
            for ci in range(c):
                for y in range(out_h):
                    for xx in range(out_w):
                        best = neg_inf
                        best_idx = -1
                        for i in range(kh):
                            iy = y * sh + i - ph
                            for j in range(kw):
                                ix = xx * sw + j - pw
                                if iy < 0 or iy >= h or ix < 0 or ix >= w:
                                    v = neg_inf
                                else:
                                    v = x[b, ci, iy, ix]
                                # strict '>' keeps the first maximum in row-major order
                                if best_idx == -1 or v > best:
                                    best = v
                                    best_idx = iy * w + ix
                        out[b, ci, y, xx] = best
                        arg[b, ci, y, xx] = best_idx
    return out_arr, arg_arr


def maxpool_backward(double[:, :, :, ::1] grad_out, cnp.int64_t[:, :, :, ::1] argmax,
                     Py_ssize_t n, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w):
    grad_arr = np.zeros((n, c, h * w), dtype=np.float64)
    cdef double[:, :, ::1] grad = grad_arr
    cdef Py_ssize_t b, ci, y, xx, idx, bad = 0
    cdef Py_ssize_t out_h = grad_out.shape[2], out_w = grad_out.shape[3]
    cdef Py_ssize_t hw = h * w
    with nogil:
        for b in range(n):
            for ci in range(c):
                for y in range(out_h):
                    for xx in range(out_w):
                        idx = argmax[b, ci, y, xx]
                        if idx < 0 or idx >= hw:
                            bad = 1
                            break
                        grad[b, ci, idx] += grad_out[b, ci, y, xx]
                    if bad:
                        break
                if bad:
                    break
            if bad:
                break
    if bad:
        raise InternalConsistencyError("maxpool argmax index outside the input plane")
    return grad_arr.reshape(n, c, h, w)
