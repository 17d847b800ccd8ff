"""The compiled kernels and the numpy fallback must agree bit for bit."""
import numpy as np
import pytest

from adslice.tensor import _backend, _kernels_py, compiled_available

pytestmark = pytest.mark.skipif(not compiled_available, reason="compiled kernels not built")

GEOMS = [
    # kh, kw, sh, sw, ph, pw
    (3, 3, 1, 1, 1, 1),
    (2, 2, 2, 2, 0, 0),
    (3, 3, 2, 2, 0, 0),
    (5, 3, 2, 1, 2, 1),
    (11, 11, 4, 4, 2, 2),
]


@pytest.fixture(scope="module")
def ck():
    from adslice.tensor import _ckernels

    return _ckernels


def _dims(h, w, g):
    kh, kw, sh, sw, ph, pw = g
    return (h + 2 * ph - kh) // sh + 1, (w + 2 * pw - kw) // sw + 1


@pytest.mark.parametrize("g", GEOMS)
def test_im2col_col2im_identical(ck, g):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 2, 23, 19))
    oh, ow = _dims(23, 19, g)
    a = _kernels_py.im2col(x, *g, oh, ow)
    b = ck.im2col(x, *g, oh, ow)
    assert a.shape == b.shape and np.array_equal(a, b)
    cols = rng.normal(size=a.shape)
    assert np.array_equal(
        _kernels_py.col2im(cols, 3, 2, 23, 19, *g, oh, ow), ck.col2im(cols, 3, 2, 23, 19, *g, oh, ow)
    )


@pytest.mark.parametrize("g", [(2, 2, 2, 2, 0, 0), (3, 3, 2, 2, 0, 0), (3, 3, 1, 1, 1, 1)])
def test_maxpool_identical(ck, g):
    rng = np.random.default_rng(1)
    # coarse values force plenty of ties
    x = rng.integers(0, 3, size=(2, 3, 13, 11)).astype(np.float64)
    oh, ow = _dims(13, 11, g)
    out_a, arg_a = _kernels_py.maxpool_forward(x, *g, oh, ow)
    out_b, arg_b = ck.maxpool_forward(x, *g, oh, ow)
    assert np.array_equal(out_a, out_b) and np.array_equal(arg_a, arg_b)
    go = rng.normal(size=out_a.shape)
    assert np.array_equal(
        _kernels_py.maxpool_backward(go, arg_a, 2, 3, 13, 11), ck.maxpool_backward(go, arg_b, 2, 3, 13, 11)
    )


def test_use_backend_switches():
    before = _backend.backend_name()
    try:
        assert _backend.use_backend("numpy").NAME == "numpy"
        assert _backend.use_backend("cython").NAME == "cython"
        with pytest.raises(ValueError):
            _backend.use_backend("fortran")
    finally:
        _backend.use_backend(before)
