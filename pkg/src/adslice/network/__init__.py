"""Architectures, loss math, parameters and optimisation."""
from .builders import build, build_alexnet_scaled, build_deep_convnet, build_vgg16_scaled
from .checkpoint import load_checkpoint, save_checkpoint
from .loss import cross_entropy, one_hot, softmax, softmax_ce_gradient
from .model import LayerState, Network
from .optim import rmsprop_step
from .spec import Conv, Dense, Flatten, MaxPool, NetworkSpec, ReLU
from .verify import gradient_check

__all__ = [
    "Conv", "Dense", "Flatten", "MaxPool", "ReLU", "NetworkSpec",
    "LayerState", "Network",
    "build", "build_deep_convnet", "build_alexnet_scaled", "build_vgg16_scaled",
    "softmax", "cross_entropy", "softmax_ce_gradient", "one_hot",
    "rmsprop_step", "save_checkpoint", "load_checkpoint", "gradient_check",
]
