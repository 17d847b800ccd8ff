"""Softmax, categorical cross-entropy and their combined logit gradient.

For logits ``f`` and one-hot targets ``t`` over ``n`` classes::

    p_i   = exp(f_i) / sum_j exp(f_j)
    L     = -sum_i t_i log p_i
    dL/df = p - t

Losses are averaged over the batch, so the returned gradient is divided by
the batch size.  Optional per-class weights scale each sample's loss by the
weight of its true class.
"""
import numpy as np

from ..errors import DataError, LabelError

PROB_FLOOR = 1e-12


def softmax(logits):
    """Row-wise softmax; the row maximum is subtracted before exponentiating."""
    f = np.asarray(logits, dtype=np.float64)
    if f.ndim != 2 or f.shape[1] < 2:
        raise ValueError(f"logits must be (N, n) with n >= 2, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise DataError("non-finite logits")
    e = np.exp(f - f.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def one_hot(labels, num_classes):
    labels = np.asarray(labels)
    if labels.ndim != 1 or np.any(labels < 0) or np.any(labels >= num_classes):
        raise LabelError(f"labels must be integers in 0..{num_classes - 1}")
    t = np.zeros((labels.size, num_classes))
    t[np.arange(labels.size), labels] = 1.0
    return t


def _check_targets(p, t):
    t = np.asarray(t, dtype=np.float64)
    if t.shape != p.shape:
        raise LabelError(f"targets shape {t.shape} does not match probabilities {p.shape}")
    if not (np.all((t == 0.0) | (t == 1.0)) and np.all(t.sum(axis=1) == 1.0)):
        raise LabelError("targets must be one-hot rows")
    return t


def _sample_weights(t, class_weights):
    if class_weights is None:
        return None
    w = np.asarray(class_weights, dtype=np.float64)
    if w.shape != (t.shape[1],):
        raise ValueError(f"need one weight per class ({t.shape[1]}), got shape {w.shape}")
    return t @ w


def cross_entropy(p, t, class_weights=None):
    """Batch mean of ``-sum_i t_i log(max(p_i, 1e-12))``."""
    p = np.asarray(p, dtype=np.float64)
    t = _check_targets(p, t)
    per_sample = -np.sum(t * np.log(np.maximum(p, PROB_FLOOR)), axis=1)
    w = _sample_weights(t, class_weights)
    if w is not None:
        per_sample = per_sample * w
    return float(per_sample.mean())


def softmax_ce_gradient(p, t, class_weights=None):
    """Gradient of the batch-mean loss w.r.t. the logits: ``(p - t) / N``."""
    p = np.asarray(p, dtype=np.float64)
    t = _check_targets(p, t)
    g = p - t
    w = _sample_weights(t, class_weights)
    if w is not None:
        g = g * w[:, None]
    return g / p.shape[0]
