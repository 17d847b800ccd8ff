"""RMSProp with the square root outside epsilon."""
import numpy as np

from ..errors import TrainingDivergenceError

DEFAULT_RHO = 0.9
DEFAULT_EPS = 1e-8


def rmsprop_step(state, lr, rho=DEFAULT_RHO, eps=DEFAULT_EPS):
    """Update ``state`` in place and return it.

    cache <- rho * cache + (1 - rho) * grad**2
    param <- param - lr * grad / (sqrt(cache) + eps)
    """
    for grad in (state.grad_weights, state.grad_bias):
        if not np.all(np.isfinite(grad)):
            raise TrainingDivergenceError("non-finite gradient")
    for param, grad, cache in (
        (state.weights, state.grad_weights, state.cache_weights),
        (state.bias, state.grad_bias, state.cache_bias),
    ):
        cache *= rho
        cache += (1.0 - rho) * grad * grad
        param -= lr * grad / (np.sqrt(cache) + eps)
    return state
