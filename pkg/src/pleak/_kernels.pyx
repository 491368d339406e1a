# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled smoothing kernels; same contract as ``pleak._kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY, NAN

cnp.import_array()

cdef int COUNT = 0, SUM = 1, MIN = 2, MAX = 3
KINDS = {"COUNT": COUNT, "SUM": SUM, "MIN": MIN, "MAX": MAX}
cdef double WEIGHT_CAP = exp(700.0)


def sigmoid(t, double a):
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef Py_ssize_t n = tv.shape[0], i
    out = np.empty(n, dtype=np.float64)
    deriv = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out, dv = deriv
    cdef double z, e, s
    for i in range(n):
        z = a * tv[i]
        if z >= 0:
            e = exp(-z)
            s = 1.0 / (1.0 + e)
        else:
            e = exp(z)
            s = e / (1.0 + e)
        ov[i] = s
        dv[i] = a * s * (1.0 - s)
    shape = np.shape(t)
    return out.reshape(shape), deriv.reshape(shape)


def smooth_reduce(str kind, values, guards, double a):
    cdef int k = KINDS[kind]
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] s = np.ascontiguousarray(guards, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], i
    dv_arr = np.zeros(n, dtype=np.float64)
    ds_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] dv = dv_arr, ds = ds_arr
    cdef double total = 0.0, m, sign, w, z
    if k == COUNT:
        for i in range(n):
            total += s[i]
            ds[i] = 1.0
        return total, dv_arr, ds_arr
    if k == SUM:
        for i in range(n):
            total += s[i] * v[i]
            dv[i] = s[i]
            ds[i] = v[i]
        return total, dv_arr, ds_arr
    # MIN is -(1/a) log sum s e^{-a v}; MAX flips the sign of v and of the result
    sign = -1.0 if k == MIN else 1.0
    m = -INFINITY
    for i in range(n):
        if s[i] > 0 and sign * v[i] > m:
            m = sign * v[i]
    if m == -INFINITY:
        return NAN, dv_arr, ds_arr
    # exponents below -700 are flushed to zero: denormals are slow and carry no weight.
    # dead rows may sit far beyond m, so their exponent is capped to keep gradients finite
    for i in range(n):
        w = a * (sign * v[i] - m)
        if w > 700.0:
            w = 700.0
        z = exp(w) if w > -700.0 else 0.0
        ds[i] = z
        if s[i] > 0:
            total += s[i] * z
    for i in range(n):
        z = ds[i] / total
        if z > WEIGHT_CAP:
            z = WEIGHT_CAP
        dv[i] = s[i] * z if s[i] > 0 else 0.0
        ds[i] = sign * z / a
    return sign * (m + log(total) / a), dv_arr, ds_arr
