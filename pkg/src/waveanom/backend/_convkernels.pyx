# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels (the hot loop of every ConvLSTM gate).

Contract matches `_convkernels_py`: pre-padded float64 arrays, cross-correlation
orientation, caller handles padding and kernel flipping.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv2d_forward(object x_in, object k_in, int sh, int sw):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_in)
    cdef double[:, :, :, ::1] k = np.ascontiguousarray(k_in)
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], w = x.shape[2], cin = x.shape[3]
    cdef Py_ssize_t kh = k.shape[0], kw = k.shape[1], cout = k.shape[3]
    cdef Py_ssize_t ho = (h - kh) // sh + 1
    cdef Py_ssize_t wo = (w - kw) // sw + 1
    out_arr = np.zeros((n, ho, wo, cout))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, y, z, i, j, ci, co
    cdef double v
    with nogil:
        for b in range(n):
            for y in range(ho):
                for z in range(wo):
                    for i in range(kh):
                        for j in range(kw):
                            for ci in range(cin):
                                v = x[b, y * sh + i, z * sw + j, ci]
                                for co in range(cout):
                                    out[b, y, z, co] += v * k[i, j, ci, co]
    return out_arr


def conv2d_grad_input(object gout_in, object k_in, int sh, int sw, int h, int w):
    cdef double[:, :, :, ::1] gout = np.ascontiguousarray(gout_in)
    cdef double[:, :, :, ::1] k = np.ascontiguousarray(k_in)
    cdef Py_ssize_t n = gout.shape[0], ho = gout.shape[1], wo = gout.shape[2], cout = gout.shape[3]
    cdef Py_ssize_t kh = k.shape[0], kw = k.shape[1], cin = k.shape[2]
    gx_arr = np.zeros((n, h, w, cin))
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t b, y, z, i, j, ci, co
    cdef double g
    with nogil:
        for b in range(n):
            for y in range(ho):
                for z in range(wo):
                    for co in range(cout):
                        g = gout[b, y, z, co]
                        for i in range(kh):
                            for j in range(kw):
                                for ci in range(cin):
                                    gx[b, y * sh + i, z * sw + j, ci] += g * k[i, j, ci, co]
    return gx_arr


def conv2d_grad_kernel(object x_in, object gout_in, int kh, int kw, int sh, int sw):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_in)
    cdef double[:, :, :, ::1] gout = np.ascontiguousarray(gout_in)
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[3]
    cdef Py_ssize_t ho = gout.shape[1], wo = gout.shape[2], cout = gout.shape[3]
    gk_arr = np.zeros((kh, kw, cin, cout))
    cdef double[:, :, :, ::1] gk = gk_arr
    cdef Py_ssize_t b, y, z, i, j, ci, co
    cdef double v
    with nogil:
        for b in range(n):
            for y in range(ho):
                for z in range(wo):
                    for i in range(kh):
                        for j in range(kw):
                            for ci in range(cin):
                                v = x[b, y * sh + i, z * sw + j, ci]
                                for co in range(cout):
                                    gk[i, j, ci, co] += v * gout[b, y, z, co]
    return gk_arr
