"""Dense float64 tensors (plain numpy arrays) and the layer primitives built on them."""
from ._backend import backend_name, compiled_available, use_backend
from .geometry import ConvGeometry, output_dim
from .ops import (
    as_tensor,
    conv2d_backward,
    conv2d_direct,
    conv2d_forward,
    dense_backward,
    dense_forward,
    flatten,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
    unflatten,
)

__all__ = [
    "ConvGeometry",
    "output_dim",
    "as_tensor",
    "backend_name",
    "compiled_available",
    "use_backend",
    "conv2d_forward",
    "conv2d_backward",
    "conv2d_direct",
    "maxpool_forward",
    "maxpool_backward",
    "relu_forward",
    "relu_backward",
    "dense_forward",
    "dense_backward",
    "flatten",
    "unflatten",
]
