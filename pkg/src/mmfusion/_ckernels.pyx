# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled versions of the hot kernels (see _kernels_numpy for the contract).

Row kernels fuse the max/exp/normalize (or moment) passes of one row into a
single scan, avoiding the temporaries the numpy path allocates.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erf, exp, log, sqrt

cnp.import_array()

cdef double _INV_SQRT2 = 0.7071067811865476
cdef double _INV_SQRT2PI = 0.3989422804014327


def softmax_fwd(double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double mx, total
    for i in range(n):
        mx = x[i, 0]
        for j in range(1, d):
            if x[i, j] > mx:
                mx = x[i, j]
        total = 0.0
        for j in range(d):
            out[i, j] = exp(x[i, j] - mx)
            total += out[i, j]
        for j in range(d):
            out[i, j] /= total
    return out_arr


def softmax_bwd(double[:, ::1] y, double[:, ::1] g):
    cdef Py_ssize_t n = y.shape[0], d = y.shape[1], i, j
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double dot
    for i in range(n):
        dot = 0.0
        for j in range(d):
            dot += g[i, j] * y[i, j]
        for j in range(d):
            out[i, j] = (g[i, j] - dot) * y[i, j]
    return out_arr


def log_softmax_fwd(double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double mx, total
    for i in range(n):
        mx = x[i, 0]
        for j in range(1, d):
            if x[i, j] > mx:
                mx = x[i, j]
        total = 0.0
        for j in range(d):
            out[i, j] = x[i, j] - mx
            total += exp(out[i, j])
        total = log(total)
        for j in range(d):
            out[i, j] -= total
    return out_arr


def log_softmax_bwd(double[:, ::1] y, double[:, ::1] g):
    cdef Py_ssize_t n = y.shape[0], d = y.shape[1], i, j
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double total
    for i in range(n):
        total = 0.0
        for j in range(d):
            total += g[i, j]
        for j in range(d):
            out[i, j] = g[i, j] - exp(y[i, j]) * total
    return out_arr


def layer_norm_fwd(double[:, ::1] x, double[::1] gain, double[::1] bias, double eps):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    out_arr = np.empty((n, d), dtype=np.float64)
    xhat_arr = np.empty((n, d), dtype=np.float64)
    inv_std_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] xhat = xhat_arr
    cdef double[::1] inv_std = inv_std_arr
    cdef double mean, var, dev, istd
    for i in range(n):
        mean = 0.0
        for j in range(d):
            mean += x[i, j]
        mean /= d
        var = 0.0
        for j in range(d):
            dev = x[i, j] - mean
            var += dev * dev
        var /= d
        istd = 1.0 / sqrt(var + eps)
        inv_std[i] = istd
        for j in range(d):
            xhat[i, j] = (x[i, j] - mean) * istd
            out[i, j] = xhat[i, j] * gain[j] + bias[j]
    return out_arr, xhat_arr, inv_std_arr


def layer_norm_bwd(double[:, ::1] g, double[:, ::1] xhat, double[::1] inv_std,
                   double[::1] gain):
    cdef Py_ssize_t n = g.shape[0], d = g.shape[1], i, j
    gx_arr = np.empty((n, d), dtype=np.float64)
    ggain_arr = np.zeros(d, dtype=np.float64)
    gbias_arr = np.zeros(d, dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef double[::1] ggain = ggain_arr
    cdef double[::1] gbias = gbias_arr
    cdef double m1, m2, gh
    for i in range(n):
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            gh = g[i, j] * gain[j]
            m1 += gh
            m2 += gh * xhat[i, j]
        m1 /= d
        m2 /= d
        for j in range(d):
            gh = g[i, j] * gain[j]
            gx[i, j] = (gh - m1 - xhat[i, j] * m2) * inv_std[i]
            ggain[j] += g[i, j] * xhat[i, j]
            gbias[j] += g[i, j]
    return gx_arr, ggain_arr, gbias_arr


def gelu_fwd(double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = 0.5 * x[i] * (1.0 + erf(x[i] * _INV_SQRT2))
    return out_arr


def gelu_bwd(double[::1] x, double[::1] g):
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double cdf, pdf
    for i in range(n):
        cdf = 0.5 * (1.0 + erf(x[i] * _INV_SQRT2))
        pdf = _INV_SQRT2PI * exp(-0.5 * x[i] * x[i])
        out[i] = g[i] * (cdf + x[i] * pdf)
    return out_arr


def adamw_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                 double lr, double beta1, double beta2, double eps,
                 double weight_decay, double bc1, double bc2):
    cdef Py_ssize_t n = p.shape[0], i
    cdef double update
    for i in range(n):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i])
        update = (m[i] / bc1) / (sqrt(v[i] / bc2) + eps)
        if weight_decay != 0.0:
            update = update + weight_decay * p[i]
        p[i] -= lr * update
