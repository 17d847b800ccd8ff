"""Declarative network descriptions and shape inference."""
from dataclasses import asdict, dataclass

from ..errors import GeometryError, ShapeError
from ..tensor import ConvGeometry


@dataclass(frozen=True)
class Conv:
    filters: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1

    @property
    def geometry(self):
        return ConvGeometry.square(self.kernel, self.stride, self.padding)


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    window: int = 2
    stride: int = 2
    padding: int = 0

    @property
    def geometry(self):
        return ConvGeometry.square(self.window, self.stride, self.padding)


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    units: int


LAYER_TYPES = {cls.__name__.lower(): cls for cls in (Conv, ReLU, MaxPool, Flatten, Dense)}


def layer_to_dict(layer):
    return {"type": type(layer).__name__.lower(), **asdict(layer)}


def layer_from_dict(d):
    d = dict(d)
    kind = d.pop("type")
    if kind not in LAYER_TYPES:
        raise ValueError(f"unknown layer type {kind!r}")
    return LAYER_TYPES[kind](**d)


def is_learnable(layer):
    return isinstance(layer, (Conv, Dense))


@dataclass(frozen=True)
class NetworkSpec:
    """Input shape (C, H, W), an ordered layer list and the number of classes.

    Construction runs shape inference, so an invalid stack fails immediately.
    """

    input_shape: tuple
    layers: tuple
    num_classes: int = 3
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.input_shape) != 3:
            raise ShapeError(f"input_shape must be (C, H, W), got {self.input_shape}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if not self.layers or not isinstance(self.layers[-1], Dense) \
                or self.layers[-1].units != self.num_classes:
            raise ShapeError(f"final layer must be Dense({self.num_classes})")
        self.shapes()

    def shapes(self):
        """Per-sample output shape after each layer."""
        shape = self.input_shape
        out = []
        for i, layer in enumerate(self.layers):
            try:
                shape = _next_shape(shape, layer)
            except GeometryError as exc:
                raise GeometryError(f"layer {i} ({type(layer).__name__}): {exc}") from None
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({type(layer).__name__}): {exc}") from None
            out.append(shape)
        return out

    def param_shapes(self):
        """``[(layer_index, weight_shape, bias_shape), ...]`` for learnable layers."""
        result = []
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Conv):
                result.append((i, (layer.filters, shape[0], layer.kernel, layer.kernel), (layer.filters,)))
            elif isinstance(layer, Dense):
                result.append((i, (shape[0], layer.units), (layer.units,)))
            shape = _next_shape(shape, layer)
        return result

    def param_count(self):
        total = 0
        for _, w, b in self.param_shapes():
            n = 1
            for d in w:
                n *= d
            total += n + b[0]
        return total

    def count(self, kind):
        return sum(isinstance(layer, kind) for layer in self.layers)

    def to_dict(self):
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "layers": [layer_to_dict(layer) for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_shape=tuple(d["input_shape"]),
            layers=tuple(layer_from_dict(x) for x in d["layers"]),
            num_classes=d["num_classes"],
            name=d.get("name", "custom"),
        )


def _next_shape(shape, layer):
    if isinstance(layer, (Conv, MaxPool)):
        if len(shape) != 3:
            raise ShapeError(f"needs a (C, H, W) input, got {shape}")
        h, w = layer.geometry.output_shape(shape[1], shape[2])
        channels = layer.filters if isinstance(layer, Conv) else shape[0]
        return (channels, h, w)
    if isinstance(layer, ReLU):
        return shape
    if isinstance(layer, Flatten):
        n = 1
        for d in shape:
            n *= d
        return (n,)
    if isinstance(layer, Dense):
        if len(shape) != 1:
            raise ShapeError(f"dense layer needs a flat input, got {shape}; add Flatten first")
        return (layer.units,)
    raise TypeError(f"unknown layer {layer!r}")
