"""Finite-difference spot checks of every parameter tensor of a network."""
from dataclasses import dataclass

import numpy as np

from ..gradcheck import DEFAULT_STEP, rel_error
from .loss import cross_entropy, one_hot, softmax, softmax_ce_gradient


@dataclass
class TensorCheck:
    name: str
    coords: list
    analytic: list
    numeric: list
    max_rel_err: float
    skipped: int


def gradient_check(network, x, labels, coords_per_tensor=5, seed=0, step=DEFAULT_STEP,
                   max_tries=50):
    """Compare analytic and central-difference gradients of the mean cross-entropy.

    For each weight and bias tensor, ``coords_per_tensor`` random entries are
    probed (all entries if the tensor is smaller).  If the ±step perturbation
    flips any ReLU or changes any pooling argmax, the loss is not differentiable
    in between; the probe is retried with step/10 and step/100, and only then is
    the coordinate rejected and another one drawn.
    """
    rng = np.random.default_rng(seed)
    t = one_hot(labels, network.spec.num_classes)

    def loss():
        return cross_entropy(softmax(network.forward(x)), t)

    network.zero_grad()
    p = softmax(network.forward(x))
    base_sig = network.activation_signature()
    network.backward(softmax_ce_gradient(p, t))

    results = []
    for lname, st in network.named_states():
        for key, param, grad in (("weights", st.weights, st.grad_weights),
                                 ("bias", st.bias, st.grad_bias)):
            flat, gflat = param.reshape(-1), grad.reshape(-1)
            want = min(coords_per_tensor, flat.size)
            pool = list(rng.permutation(flat.size)[: max(want, min(flat.size, want + max_tries))])
            coords, analytic, numeric, skipped = [], [], [], 0
            while pool and len(coords) < want:
                idx = int(pool.pop(0))
                value = _probe(flat, idx, step, loss, network, base_sig)
                if value is None:
                    skipped += 1
                    continue
                coords.append(idx)
                analytic.append(float(gflat[idx]))
                numeric.append(value)
            err = rel_error(np.array(analytic), np.array(numeric))
            results.append(TensorCheck(f"{lname}.{key}", coords, analytic, numeric,
                                       float(err.max()) if err.size else 0.0, skipped))
    network.forward(x)
    return results


def _probe(flat, idx, step, loss, network, base_sig):
    orig = flat[idx]
    try:
        for h in (step, step / 10, step / 100):
            flat[idx] = orig + h
            plus = loss()
            same = network.activation_signature() == base_sig
            flat[idx] = orig - h
            minus = loss()
            if same and network.activation_signature() == base_sig:
                return (plus - minus) / (2 * h)
        return None
    finally:
        flat[idx] = orig
