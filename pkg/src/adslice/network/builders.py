"""Architectures: the proposed deep ConvNet and reduced AlexNet / VGG-16 baselines."""
from ..errors import GeometryError
from .spec import Conv, Dense, Flatten, MaxPool, NetworkSpec, ReLU

# dense widths before the 3-way output
FC_STACKS = {
    "canonical": (512, 256, 128, 64, 32, 16),
    "wide": (1024, 512, 256, 128, 64, 32),
}

SCALES = {
    "paper": {"input": (1, 300, 300), "filters": (4, 8, 16, 32, 64, 128), "dense": None},
    "desk": {"input": (1, 64, 64), "filters": (4, 8, 16, 32), "dense": (64, 32)},
}


def _check_input(input_shape):
    c, h, w = input_shape
    if c != 1 or h != w:
        raise ValueError(f"expected a square single-channel input, got {input_shape}")


def _dense_head(widths, num_classes):
    layers = [Flatten()]
    for units in widths:
        layers += [Dense(units), ReLU()]
    layers.append(Dense(num_classes))
    return layers


def build_deep_convnet(input_shape=None, scale="paper", fc_stack="canonical", num_classes=3):
    """Repeated [3x3 same conv -> ReLU -> 2x2/2 max-pool] blocks with doubling filters.

    ``scale="paper"``: six blocks (4..128 filters) on 1x300x300 and the dense
    stack named by ``fc_stack``.  ``scale="desk"``: four blocks (4..32) on
    1x64x64 and dense 64, 32.  Both end in ``Dense(num_classes)``; softmax
    is applied by the loss, not as a layer.
    """
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {sorted(SCALES)}, got {scale!r}")
    cfg = SCALES[scale]
    input_shape = tuple(input_shape or cfg["input"])
    _check_input(input_shape)
    size = input_shape[1]
    if size < 2 ** len(cfg["filters"]):
        raise GeometryError(
            f"{size}x{size} input is too small for {len(cfg['filters'])} pooling blocks"
        )
    layers = []
    for f in cfg["filters"]:
        layers += [Conv(f, 3, 1, 1), ReLU(), MaxPool(2, 2)]
    dense = cfg["dense"] if cfg["dense"] is not None else FC_STACKS[fc_stack]
    layers += _dense_head(dense, num_classes)
    return NetworkSpec(input_shape, tuple(layers), num_classes, name=f"deepconvnet-{scale}")


def _width(n, divisor):
    return max(1, round(n / divisor))


def build_alexnet_scaled(input_shape=(1, 64, 64), divisor=8, num_classes=3):
    """Five conv layers, overlapping 3x3/2 pooling after conv 1, 2 and 5, three dense layers."""
    _check_input(input_shape)
    w = lambda n: _width(n, divisor)  # noqa: E731
    pool = MaxPool(3, 2)
    layers = [
        Conv(w(96), 11, 4, 2), ReLU(), pool,
        Conv(w(256), 5, 1, 2), ReLU(), pool,
        Conv(w(384), 3, 1, 1), ReLU(),
        Conv(w(384), 3, 1, 1), ReLU(),
        Conv(w(256), 3, 1, 1), ReLU(), pool,
        Flatten(),
        Dense(w(4096)), ReLU(),
        Dense(w(4096)), ReLU(),
        Dense(num_classes),
    ]
    return NetworkSpec(tuple(input_shape), tuple(layers), num_classes, name=f"alexnet/{divisor}")


def build_vgg16_scaled(input_shape=(1, 64, 64), divisor=8, num_classes=3):
    """13 3x3 conv layers grouped 2-2-3-3-3 with 2x2/2 pooling, then three dense layers."""
    _check_input(input_shape)
    layers = []
    for width, repeat in ((64, 2), (128, 2), (256, 3), (512, 3), (512, 3)):
        for _ in range(repeat):
            layers += [Conv(_width(width, divisor), 3, 1, 1), ReLU()]
        layers.append(MaxPool(2, 2))
    layers += _dense_head((_width(4096, divisor), _width(4096, divisor)), num_classes)
    return NetworkSpec(tuple(input_shape), tuple(layers), num_classes, name=f"vgg16/{divisor}")


def build(arch, scale="desk", input_shape=None, divisor=8, fc_stack="canonical"):
    """Dispatch by architecture name: ``deepconvnet``, ``alexnet`` or ``vgg16``."""
    if arch == "deepconvnet":
        return build_deep_convnet(input_shape, scale, fc_stack)
    if input_shape is None:
        input_shape = SCALES[scale]["input"]
    if arch == "alexnet":
        return build_alexnet_scaled(input_shape, divisor if scale == "desk" else 1)
    if arch == "vgg16":
        return build_vgg16_scaled(input_shape, divisor if scale == "desk" else 1)
    raise ValueError(f"unknown architecture {arch!r}")
