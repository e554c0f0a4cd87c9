"""Pure-numpy reference implementations of the compiled kernels."""

import numpy as np


def cubic(z, out):
    np.multiply(z.real * z.real + z.imag * z.imag, z, out=out)


def scatter(src, src_idx, dst_idx, scale, dst, clear=True):
    if clear:
        dst.fill(0.0)
    dst[dst_idx] = scale * src[src_idx]


def weighted_norm2(z, w):
    return float(np.dot(w, z.real * z.real + z.imag * z.imag))


def weighted_im_inner(a, b, w):
    return float(np.dot(w, a.real * b.imag - a.imag * b.real))


def weighted_re_inner(a, b, w):
    return float(np.dot(w, a.real * b.real + a.imag * b.imag))


def axpy(alpha, x, y, out):
    np.multiply(x, alpha, out=out)
    out += y
