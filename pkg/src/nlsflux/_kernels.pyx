# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled elementwise kernels for the pseudo-spectral hot loop.

Every routine works on flat, C-contiguous arrays so one implementation
serves d = 2 and d = 3.  The numpy reference versions live in
``_kernels_py``; both must agree to round-off.
"""

from libc.string cimport memset


def cubic(const double complex[::1] z, double complex[::1] out):
    """out[i] = |z[i]|^2 z[i]."""
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double re, im, r2
    for i in range(n):
        re = z[i].real
        im = z[i].imag
        r2 = re * re + im * im
        out[i] = r2 * z[i]


def scatter(const double complex[::1] src, const Py_ssize_t[::1] src_idx,
            const Py_ssize_t[::1] dst_idx, double scale,
            double complex[::1] dst, bint clear=True):
    """dst[dst_idx[j]] = scale * src[src_idx[j]], optionally zeroing dst first."""
    cdef Py_ssize_t j, n = src_idx.shape[0]
    if clear:
        memset(&dst[0], 0, dst.shape[0] * sizeof(double complex))
    for j in range(n):
        dst[dst_idx[j]] = scale * src[src_idx[j]]


def weighted_norm2(const double complex[::1] z, const double[::1] w):
    """sum_i w[i] |z[i]|^2."""
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double acc = 0.0, re, im
    for i in range(n):
        re = z[i].real
        im = z[i].imag
        acc += w[i] * (re * re + im * im)
    return acc


def weighted_im_inner(const double complex[::1] a, const double complex[::1] b,
                      const double[::1] w):
    """sum_i w[i] Im(conj(a[i]) b[i])."""
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += w[i] * (a[i].real * b[i].imag - a[i].imag * b[i].real)
    return acc


def weighted_re_inner(const double complex[::1] a, const double complex[::1] b,
                      const double[::1] w):
    """sum_i w[i] Re(conj(a[i]) b[i])."""
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += w[i] * (a[i].real * b[i].real + a[i].imag * b[i].imag)
    return acc


def axpy(double complex alpha, const double complex[::1] x,
         const double complex[::1] y, double complex[::1] out):
    """out = y + alpha * x."""
    cdef Py_ssize_t i, n = x.shape[0]
    for i in range(n):
        out[i] = y[i] + alpha * x[i]
