import numpy as np
import pytest

from nlsflux import _kernels_py, kernels


def _data(rng, n=1000):
    z = rng.normal(size=n) + 1j * rng.normal(size=n)
    return z, rng.random(n)


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_backends_agree(rng):
    from nlsflux import _kernels as kc

    z, w = _data(rng)
    a, b = np.empty_like(z), np.empty_like(z)
    kc.cubic(z, a)
    _kernels_py.cubic(z, b)
    assert np.allclose(a, b, rtol=1e-14)
    for fn in ("weighted_im_inner", "weighted_re_inner"):
        assert getattr(kc, fn)(z, z[::-1].copy(), w) == pytest.approx(
            getattr(_kernels_py, fn)(z, z[::-1].copy(), w), rel=1e-12)
    assert kc.weighted_norm2(z, w) == pytest.approx(_kernels_py.weighted_norm2(z, w), rel=1e-12)
    src_idx = np.arange(10, dtype=np.intp)
    dst_idx = np.arange(10, dtype=np.intp)[::-1].copy()
    d1, d2 = np.ones(20, complex), np.ones(20, complex)
    kc.scatter(z, src_idx, dst_idx, 2.0, d1)
    _kernels_py.scatter(z, src_idx, dst_idx, 2.0, d2)
    assert np.array_equal(d1, d2)
    o1, o2 = np.empty_like(z), np.empty_like(z)
    kc.axpy(0.5j, z, z[::-1].copy(), o1)
    _kernels_py.axpy(0.5j, z, z[::-1].copy(), o2)
    assert np.allclose(o1, o2, rtol=1e-15)


def test_use_backend_switch():
    prev = kernels.use_backend("numpy")
    try:
        assert kernels.BACKEND == "numpy"
        assert kernels.cubic is _kernels_py.cubic
    finally:
        kernels.use_backend(prev)
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
