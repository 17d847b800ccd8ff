"""Differentiable layer primitives on float64 numpy arrays.

Layouts are NCHW for feature maps and (F, C, kh, kw) for convolution
filters.  Every backward is hand-derived; nothing here records a tape.
"""
import numpy as np

from ..errors import GeometryError, InternalConsistencyError, ShapeError
from . import _backend
from .geometry import ConvGeometry


def as_tensor(x):
    """Return ``x`` as a C-contiguous float64 array (no copy when already one)."""
    return np.ascontiguousarray(x, dtype=np.float64)


def _check_rank(name, x, rank):
    if x.ndim != rank:
        raise ShapeError(f"{name} must have {rank} dimensions, got shape {x.shape}")


def _conv_shapes(input, weights, bias, geom):
    _check_rank("input", input, 4)
    _check_rank("weights", weights, 4)
    n, c, h, w = input.shape
    f, wc, kh, kw = weights.shape
    if wc != c:
        raise ShapeError(f"input has {c} channels but weights expect {wc} (weights {weights.shape})")
    if (kh, kw) != (geom.kernel_h, geom.kernel_w):
        raise ShapeError(
            f"weights kernel {kh}x{kw} does not match geometry {geom.kernel_h}x{geom.kernel_w}"
        )
    if bias is not None and bias.shape != (f,):
        raise ShapeError(f"bias must have shape ({f},), got {bias.shape}")
    out_h, out_w = geom.output_shape(h, w)
    return n, c, h, w, f, out_h, out_w


def conv2d_forward(input, weights, bias, geom, return_cols=False):
    """Cross-correlate ``input`` with ``weights`` via im2col + one matrix product.

    Parameters
    ----------
    input : ndarray, shape (N, C, H, W)
    weights : ndarray, shape (F, C, kh, kw)
    bias : ndarray, shape (F,)
    geom : ConvGeometry
    return_cols : bool
        Also return the unrolled patch matrix so a backward pass can reuse it.

    Returns
    -------
    out : ndarray, shape (N, F, H', W')
    cols : ndarray, shape (C*kh*kw, N*H'*W'), only when ``return_cols``
    """
    input, weights, bias = as_tensor(input), as_tensor(weights), as_tensor(bias)
    n, c, h, w, f, out_h, out_w = _conv_shapes(input, weights, bias, geom)
    cols = _backend.kernels.im2col(
        input, geom.kernel_h, geom.kernel_w, geom.stride_h, geom.stride_w,
        geom.pad_h, geom.pad_w, out_h, out_w,
    )
    out = weights.reshape(f, -1) @ cols
    out = out.reshape(f, n, out_h, out_w).transpose(1, 0, 2, 3) + bias[None, :, None, None]
    out = np.ascontiguousarray(out)
    if return_cols:
        return out, cols
    return out


def conv2d_backward(grad_out, input, weights, geom, cols=None):
    """Gradients of ``conv2d_forward`` with respect to input, weights and bias."""
    input, weights, grad_out = as_tensor(input), as_tensor(weights), as_tensor(grad_out)
    n, c, h, w, f, out_h, out_w = _conv_shapes(input, weights, None, geom)
    if grad_out.shape != (n, f, out_h, out_w):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match forward output {(n, f, out_h, out_w)}"
        )
    if cols is None:
        cols = _backend.kernels.im2col(
            input, geom.kernel_h, geom.kernel_w, geom.stride_h, geom.stride_w,
            geom.pad_h, geom.pad_w, out_h, out_w,
        )
    g = grad_out.transpose(1, 0, 2, 3).reshape(f, -1)
    grad_weights = (g @ cols.T).reshape(weights.shape)
    grad_bias = g.sum(axis=1)
    grad_cols = np.ascontiguousarray(weights.reshape(f, -1).T @ g)
    grad_input = _backend.kernels.col2im(
        grad_cols, n, c, h, w, geom.kernel_h, geom.kernel_w, geom.stride_h,
        geom.stride_w, geom.pad_h, geom.pad_w, out_h, out_w,
    )
    return grad_input, grad_weights, grad_bias


def conv2d_direct(input, weights, bias, geom):
    """Reference convolution by explicit loops over every output and tap.

    Slow; used as an independent check on the im2col path.
    """
    input, weights, bias = as_tensor(input), as_tensor(weights), as_tensor(bias)
    n, c, h, w, f, out_h, out_w = _conv_shapes(input, weights, bias, geom)
    out = np.empty((n, f, out_h, out_w))
    for b in range(n):
        for fo in range(f):
            for y in range(out_h):
                for x in range(out_w):
                    acc = bias[fo]
                    for ci in range(c):
                        for i in range(geom.kernel_h):
                            iy = y * geom.stride_h + i - geom.pad_h
                            if not 0 <= iy < h:
                                continue
                            for j in range(geom.kernel_w):
                                ix = x * geom.stride_w + j - geom.pad_w
                                if 0 <= ix < w:
                                    acc += input[b, ci, iy, ix] * weights[fo, ci, i, j]
                    out[b, fo, y, x] = acc
    return out


def maxpool_forward(input, geom):
    """Max over each window; returns ``(out, argmax)``.

    ``argmax`` holds, per output cell, the flat ``row * W + col`` index into
    the input plane of the first maximal element in row-major window order.
    """
    input = as_tensor(input)
    _check_rank("input", input, 4)
    if geom.pad_h >= geom.kernel_h or geom.pad_w >= geom.kernel_w:
        raise GeometryError("pooling padding must be smaller than the window")
    out_h, out_w = geom.output_shape(input.shape[2], input.shape[3])
    return _backend.kernels.maxpool_forward(
        input, geom.kernel_h, geom.kernel_w, geom.stride_h, geom.stride_w,
        geom.pad_h, geom.pad_w, out_h, out_w,
    )


def maxpool_backward(grad_out, argmax, input_shape):
    grad_out = as_tensor(grad_out)
    argmax = np.ascontiguousarray(argmax, dtype=np.int64)
    if grad_out.shape != argmax.shape:
        raise InternalConsistencyError(
            f"grad_out shape {grad_out.shape} does not match argmax shape {argmax.shape}"
        )
    n, c, h, w = input_shape
    if grad_out.shape[:2] != (n, c):
        raise InternalConsistencyError(
            f"grad_out batch/channels {grad_out.shape[:2]} do not match input {(n, c)}"
        )
    return _backend.kernels.maxpool_backward(grad_out, argmax, n, c, h, w)


def relu_forward(input):
    return np.maximum(as_tensor(input), 0.0)


def relu_backward(grad_out, input):
    """Pass gradient where ``input > 0``; the derivative at 0 is taken as 0."""
    return np.where(as_tensor(input) > 0.0, as_tensor(grad_out), 0.0)


def dense_forward(input, weights, bias):
    input, weights, bias = as_tensor(input), as_tensor(weights), as_tensor(bias)
    _check_rank("input", input, 2)
    _check_rank("weights", weights, 2)
    if input.shape[1] != weights.shape[0]:
        raise ShapeError(f"cannot multiply {input.shape} by {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"bias must have shape ({weights.shape[1]},), got {bias.shape}")
    return input @ weights + bias


def dense_backward(grad_out, input, weights):
    """Returns ``(grad_input, grad_weights, grad_bias)``."""
    grad_out, input, weights = as_tensor(grad_out), as_tensor(input), as_tensor(weights)
    if grad_out.shape != (input.shape[0], weights.shape[1]):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match forward output "
            f"{(input.shape[0], weights.shape[1])}"
        )
    return grad_out @ weights.T, input.T @ grad_out, grad_out.sum(axis=0)


def flatten(input):
    """Row-major reshape (N, C, H, W) -> (N, C*H*W)."""
    input = as_tensor(input)
    return input.reshape(input.shape[0], -1)


def unflatten(input, shape):
    return as_tensor(input).reshape(shape)
