"""Parameter state and the forward/backward pass over a NetworkSpec."""
import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import InternalConsistencyError, ShapeError
from ..tensor import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
)
from .loss import softmax
from .spec import Conv, Dense, Flatten, MaxPool, ReLU


@dataclass
class LayerState:
    """Weights, bias, their gradient accumulators and RMSProp caches for one layer."""

    weights: np.ndarray
    bias: np.ndarray
    grad_weights: np.ndarray = field(default=None, repr=False)
    grad_bias: np.ndarray = field(default=None, repr=False)
    cache_weights: np.ndarray = field(default=None, repr=False)
    cache_bias: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        for name, like in (("grad_weights", self.weights), ("grad_bias", self.bias),
                           ("cache_weights", self.weights), ("cache_bias", self.bias)):
            value = getattr(self, name)
            if value is None:
                setattr(self, name, np.zeros_like(like))
            else:
                value = np.ascontiguousarray(value, dtype=np.float64)
                if value.shape != like.shape:
                    raise ShapeError(f"{name} shape {value.shape} != {like.shape}")
                setattr(self, name, value)

    def zero_grad(self):
        self.grad_weights.fill(0.0)
        self.grad_bias.fill(0.0)

    def tensors(self):
        """Named arrays that make up the persistent state (no gradients)."""
        return {
            "weights": self.weights,
            "bias": self.bias,
            "cache_weights": self.cache_weights,
            "cache_bias": self.cache_bias,
        }


def glorot_uniform(rng, shape, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Network:
    """A NetworkSpec bound to parameter states.

    ``forward`` keeps what ``backward`` needs from the most recent call;
    ``backward`` adds into the gradient accumulators (call ``zero_grad``
    between steps).
    """

    def __init__(self, spec, states):
        self.spec = spec
        self.states = dict(states)
        for index, wshape, bshape in spec.param_shapes():
            if index not in self.states:
                raise ShapeError(f"missing parameters for layer {index}")
            st = self.states[index]
            if st.weights.shape != wshape or st.bias.shape != bshape:
                raise ShapeError(
                    f"layer {index}: parameters {st.weights.shape}/{st.bias.shape} "
                    f"do not match spec {wshape}/{bshape}"
                )
        self._trace = None

    @classmethod
    def initialize(cls, spec, seed=0):
        """Glorot-uniform weights and zero biases drawn from ``default_rng(seed)``."""
        rng = np.random.default_rng(seed)
        states = {}
        for index, wshape, bshape in spec.param_shapes():
            if isinstance(spec.layers[index], Conv):
                receptive = wshape[2] * wshape[3]
                fan_in, fan_out = wshape[1] * receptive, wshape[0] * receptive
            else:
                fan_in, fan_out = wshape
            states[index] = LayerState(glorot_uniform(rng, wshape, fan_in, fan_out), np.zeros(bshape))
        return cls(spec, states)

    def named_states(self):
        return [(f"layer{index:02d}", self.states[index]) for index, _, _ in self.spec.param_shapes()]

    def zero_grad(self):
        for st in self.states.values():
            st.zero_grad()

    def forward(self, x):
        """Logits for a batch ``x`` of shape (N, C, H, W)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape[1:] != self.spec.input_shape:
            raise ShapeError(f"input shape {x.shape[1:]} does not match network {self.spec.input_shape}")
        trace = []
        for i, layer in enumerate(self.spec.layers):
            if isinstance(layer, Conv):
                st = self.states[i]
                out, cols = conv2d_forward(x, st.weights, st.bias, layer.geometry, return_cols=True)
                trace.append((x, cols))
            elif isinstance(layer, ReLU):
                out = relu_forward(x)
                trace.append(x)
            elif isinstance(layer, MaxPool):
                out, argmax = maxpool_forward(x, layer.geometry)
                trace.append((x.shape, argmax))
            elif isinstance(layer, Flatten):
                out = x.reshape(x.shape[0], -1)
                trace.append(x.shape)
            elif isinstance(layer, Dense):
                st = self.states[i]
                out = dense_forward(x, st.weights, st.bias)
                trace.append(x)
            x = out
        self._trace = trace
        return x

    def backward(self, grad_logits):
        """Backpropagate d(loss)/d(logits) through the last forward pass."""
        if self._trace is None:
            raise InternalConsistencyError("backward called before forward")
        g = np.ascontiguousarray(grad_logits, dtype=np.float64)
        for i in range(len(self.spec.layers) - 1, -1, -1):
            layer, saved = self.spec.layers[i], self._trace[i]
            if isinstance(layer, Conv):
                x, cols = saved
                st = self.states[i]
                g, gw, gb = conv2d_backward(g, x, st.weights, layer.geometry, cols=cols)
                st.grad_weights += gw
                st.grad_bias += gb
            elif isinstance(layer, ReLU):
                g = relu_backward(g, saved)
            elif isinstance(layer, MaxPool):
                shape, argmax = saved
                g = maxpool_backward(g, argmax, shape)
            elif isinstance(layer, Flatten):
                g = g.reshape(saved)
            elif isinstance(layer, Dense):
                st = self.states[i]
                g, gw, gb = dense_backward(g, saved, st.weights)
                st.grad_weights += gw
                st.grad_bias += gb
        return g

    def activation_signature(self):
        """Digest of every ReLU on/off mask and pooling argmax in the last forward pass.

        Two forward passes with equal signatures follow the same linear piece
        of the network, so finite differences between them are valid.
        """
        if self._trace is None:
            raise InternalConsistencyError("no forward pass recorded")
        h = hashlib.sha256()
        for layer, saved in zip(self.spec.layers, self._trace):
            if isinstance(layer, ReLU):
                h.update(np.packbits(saved > 0).tobytes())
            elif isinstance(layer, MaxPool):
                h.update(saved[1].tobytes())
        return h.hexdigest()

    def predict_proba(self, x, batch_size=256):
        """Softmax probabilities, computed in chunks; does not keep a trace."""
        x = np.asarray(x, dtype=np.float64)
        saved = self._trace
        chunks = [softmax(self.forward(x[i:i + batch_size])) for i in range(0, len(x), batch_size)]
        self._trace = saved
        if not chunks:
            return np.zeros((0, self.spec.num_classes))
        return np.concatenate(chunks)

    def copy(self):
        return Network(self.spec, {
            i: LayerState(st.weights.copy(), st.bias.copy(), st.grad_weights.copy(),
                          st.grad_bias.copy(), st.cache_weights.copy(), st.cache_bias.copy())
            for i, st in self.states.items()
        })
