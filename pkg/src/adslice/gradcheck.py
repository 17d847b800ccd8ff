"""Central finite-difference gradient checking."""
import numpy as np

DEFAULT_STEP = 1e-5
# Below this magnitude both gradients count as zero; keeps the ratio finite.
REL_ERR_FLOOR = 1e-8


def rel_error(analytic, numeric, floor=REL_ERR_FLOOR):
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numerical_gradient(f, x, step=DEFAULT_STEP, indices=None):
    """Central differences of scalar ``f()`` w.r.t. entries of ``x``, perturbed in place.

    With ``indices`` (an iterable of flat indices) only those entries are
    probed and a 1-D array in the same order is returned; otherwise the full
    gradient with ``x``'s shape.
    """
    flat = x.reshape(-1)
    if not np.shares_memory(flat, x):
        raise ValueError("x must be contiguous so it can be perturbed in place")
    probe = range(flat.size) if indices is None else list(indices)
    out = np.zeros(len(probe))
    for k, idx in enumerate(probe):
        orig = flat[idx]
        flat[idx] = orig + step
        plus = f()
        flat[idx] = orig - step
        minus = f()
        flat[idx] = orig
        out[k] = (plus - minus) / (2 * step)
    if indices is None:
        return out.reshape(x.shape)
    return out


def max_rel_error(analytic, numeric, floor=REL_ERR_FLOOR):
    err = rel_error(analytic, numeric, floor)
    return float(err.max()) if err.size else 0.0
