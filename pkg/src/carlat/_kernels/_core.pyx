# cython: boundscheck=False, wraparound=False, cdivision=True
"""Flat-index stencil kernels.

Index plans (padded array, base map, flat offsets) are prepared by
``carlat._kernels``; these loops only gather and accumulate.
"""


def stencil_const(const double[::1] fpad, const long long[::1] base,
                  const long long[::1] off, const double[::1] weights,
                  double[::1] out):
    cdef Py_ssize_t i, k
    cdef Py_ssize_t n = base.shape[0]
    cdef Py_ssize_t m = off.shape[0]
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(m):
            acc += weights[k] * fpad[base[i] + off[k]]
        out[i] = acc


def stencil_var(const double[::1] fpad, const long long[::1] base,
                const long long[::1] off, const double[:, ::1] coeffs,
                double[::1] out):
    cdef Py_ssize_t i, k
    cdef Py_ssize_t n = base.shape[0]
    cdef Py_ssize_t m = off.shape[0]
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(m):
            acc += coeffs[k, i] * fpad[base[i] + off[k]]
        out[i] = acc
