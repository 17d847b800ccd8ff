"""Numpy implementations of the hot convolution/pooling kernels.

These mirror ``_ckernels.pyx`` exactly, including the per-element
accumulation order, so both backends return bit-identical arrays.
"""
import numpy as np

from ..errors import InternalConsistencyError

NAME = "numpy"


def im2col(x, kh, kw, sh, sw, ph, pw, out_h, out_w):
    """Unroll patches of ``x`` (N, C, H, W) into a (C*kh*kw, N*out_h*out_w) matrix."""
    n, c, _, _ = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = np.empty((c, kh, kw, n, out_h, out_w), dtype=np.float64)
    for i in range(kh):
        i_max = i + sh * out_h
        for j in range(kw):
            j_max = j + sw * out_w
            cols[:, i, j] = xp[:, :, i:i_max:sh, j:j_max:sw].transpose(1, 0, 2, 3)
    return cols.reshape(c * kh * kw, n * out_h * out_w)


def col2im(cols, n, c, h, w, kh, kw, sh, sw, ph, pw, out_h, out_w):
    """Scatter-add columns back onto an (N, C, H, W) image; adjoint of ``im2col``."""
    cols6 = cols.reshape(c, kh, kw, n, out_h, out_w)
    img = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=np.float64)
    for i in range(kh):
        i_max = i + sh * out_h
        for j in range(kw):
            j_max = j + sw * out_w
            img[:, :, i:i_max:sh, j:j_max:sw] += cols6[:, i, j].transpose(1, 0, 2, 3)
    return np.ascontiguousarray(img[:, :, ph:ph + h, pw:pw + w])


def maxpool_forward(x, kh, kw, sh, sw, ph, pw, out_h, out_w):
    """Window max and the flat (row*W + col) input index of the first maximum."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=-np.inf)
    view = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    windows = view[:, :, ::sh, ::sw][:, :, :out_h, :out_w].reshape(
        n, c, out_h, out_w, kh * kw
    )
    local = np.argmax(windows, axis=-1)
    out = np.take_along_axis(windows, local[..., None], axis=-1)[..., 0]
    rows = np.arange(out_h)[:, None] * sh + local // kw - ph
    cols = np.arange(out_w)[None, :] * sw + local % kw - pw
    argmax = (rows * w + cols).astype(np.int64)
    return np.ascontiguousarray(out), argmax


def maxpool_backward(grad_out, argmax, n, c, h, w):
    """Route ``grad_out`` to the recorded argmax positions, accumulating overlaps."""
    if argmax.size and (argmax.min() < 0 or argmax.max() >= h * w):
        raise InternalConsistencyError("maxpool argmax index outside the input plane")
    grad = np.zeros((n * c, h * w), dtype=np.float64)
    plane = np.repeat(np.arange(n * c), argmax.shape[2] * argmax.shape[3])
    np.add.at(grad, (plane, argmax.reshape(-1)), grad_out.reshape(-1))
    return grad.reshape(n, c, h, w)
