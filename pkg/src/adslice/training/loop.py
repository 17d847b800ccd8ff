"""The training loop and split evaluation."""
import contextlib
import logging
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ..errors import DataError, StratificationError, TrainingDivergenceError
from ..network.checkpoint import save_checkpoint
from ..network.loss import cross_entropy, one_hot, softmax, softmax_ce_gradient
from ..network.model import Network
from ..network.optim import rmsprop_step
from .config import TrainConfig
from .export import CURVE_COLUMNS
from .metrics import report_from_scores

log = logging.getLogger(__name__)

EVAL_BATCH = 256


def class_weights(class_counts, mode="inverse_frequency"):
    """Per-class loss weights: all ones, or ``total / (n * count_i)``."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size < 1:
        raise ValueError("class_counts must be a non-empty 1-D sequence")
    if np.any(counts < 1):
        raise StratificationError(f"every class needs at least one sample, got counts {counts.tolist()}")
    if mode == "none":
        return np.ones(counts.size)
    if mode == "inverse_frequency":
        return counts.sum() / (counts.size * counts)
    raise ValueError(f"unknown class weighting mode {mode!r}")


def as_arrays(split):
    """``(images, labels)`` from a SliceDataset or an ``(x, y)`` pair."""
    if isinstance(split, tuple):
        x, y = split
    else:
        x, y = split.images(), split.labels()
    return np.ascontiguousarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64)


def _scores(network, x):
    try:
        return network.predict_proba(x, EVAL_BATCH)
    except DataError as exc:
        raise TrainingDivergenceError(f"non-finite logits during evaluation: {exc}") from None


def evaluate(network, split, class_weights=None):
    """EvalReport (confusion, per-class scores, ROC) of ``network`` on one split."""
    x, y = as_arrays(split)
    if len(y) == 0:
        raise ValueError("cannot evaluate on an empty split")
    p = _scores(network, x)
    loss = cross_entropy(p, one_hot(y, network.spec.num_classes), class_weights)
    return report_from_scores(p, y, loss)


def _loss_acc(network, x, y, weights):
    p = _scores(network, x)
    loss = cross_entropy(p, one_hot(y, network.spec.num_classes), weights)
    return loss, float(np.mean(np.argmax(p, axis=1) == y))


def train(spec, splits, config=TrainConfig(), run_dir=None, network=None, on_epoch=None):
    """Train ``spec`` on ``splits = (train, val, test)``; returns ``(network, report)``.

    Each epoch shuffles the training split with a seeded generator, runs
    forward, loss, backward and one RMSProp step per batch (the last batch
    may be short), then scores the full validation split.  The report is
    computed on the test split with the final parameters and carries the
    per-epoch curves.  With ``run_dir``, ``metrics.tsv`` is rewritten after
    every epoch and checkpoints ``last`` and ``best`` (highest validation
    accuracy, earliest on ties) are kept under ``run_dir/checkpoints``.
    """
    train_split, val_split, test_split = splits
    x_tr, y_tr = as_arrays(train_split)
    x_va, y_va = as_arrays(val_split)
    n = spec.num_classes
    if len(y_tr) == 0 or len(y_va) == 0 or len(as_arrays(test_split)[1]) == 0:
        raise ValueError("train, validation and test splits must all be non-empty")
    if np.any(y_tr < 0) or np.any(y_tr >= n):
        raise ValueError(f"labels must lie in 0..{n - 1}")
    counts = np.bincount(y_tr, minlength=n)
    if np.any(counts == 0):
        raise StratificationError(f"training split lacks class(es) {np.nonzero(counts == 0)[0].tolist()}")
    weights = None if config.class_weighting == "none" else class_weights(counts, config.class_weighting)

    limiter = threadpool_limits(1) if config.deterministic else contextlib.nullcontext()
    with limiter:
        net = network if network is not None else Network.initialize(spec, config.seed)
        shuffle_rng = np.random.default_rng([config.seed, 1])
        initial_loss, _ = _loss_acc(net, x_tr, y_tr, weights)
        curves = {k: [] for k in CURVE_COLUMNS[1:]}
        curves["initial_loss"] = initial_loss
        best_acc = -1.0
        ckpt_dir = Path(run_dir) / "checkpoints" if run_dir is not None else None
        log.info("initial train loss %.6f", initial_loss)

        for epoch in range(config.epochs):
            order = shuffle_rng.permutation(len(y_tr))
            loss_sum, correct = 0.0, 0
            for b, start in enumerate(range(0, len(order), config.batch_size)):
                idx = order[start:start + config.batch_size]
                xb, tb = x_tr[idx], one_hot(y_tr[idx], n)
                try:
                    p = softmax(net.forward(xb))
                    loss = cross_entropy(p, tb, weights)
                    if not np.isfinite(loss):
                        raise TrainingDivergenceError("non-finite loss")
                    net.zero_grad()
                    net.backward(softmax_ce_gradient(p, tb, weights))
                    for _, st in net.named_states():
                        rmsprop_step(st, config.lr, config.rho, config.eps)
                except (DataError, TrainingDivergenceError) as exc:
                    raise TrainingDivergenceError(
                        f"training diverged at epoch {epoch + 1}, batch {b + 1}: {exc}",
                        epoch=epoch + 1, batch=b + 1) from None
                loss_sum += loss * len(idx)
                correct += int(np.sum(np.argmax(p, axis=1) == y_tr[idx]))
            val_loss, val_acc = _loss_acc(net, x_va, y_va, weights)
            curves["train_loss"].append(loss_sum / len(order))
            curves["train_acc"].append(correct / len(order))
            curves["val_loss"].append(val_loss)
            curves["val_acc"].append(val_acc)
            log.info("epoch %d/%d  train loss %.6f acc %.4f  val loss %.6f acc %.4f", epoch + 1,
                     config.epochs, curves["train_loss"][-1], curves["train_acc"][-1], val_loss, val_acc)
            if ckpt_dir is not None:
                _write_metrics(Path(run_dir) / "metrics.tsv", curves)
                meta = {"epoch": epoch + 1, "val_acc": val_acc}
                save_checkpoint(ckpt_dir / "last", net, step=epoch + 1, seed=config.seed, extra=meta)
                if val_acc > best_acc:
                    save_checkpoint(ckpt_dir / "best", net, step=epoch + 1, seed=config.seed, extra=meta)
            best_acc = max(best_acc, val_acc)
            if on_epoch is not None:
                on_epoch(epoch + 1, curves)

        report = evaluate(net, test_split, weights)
    report.curves = curves
    return net, report


def _write_metrics(path, curves):
    rows = ["\t".join(CURVE_COLUMNS)]
    for e in range(len(curves["train_loss"])):
        rows.append("\t".join([str(e + 1)] + [format(curves[k][e], ".17g") for k in CURVE_COLUMNS[1:]]))
    Path(path).write_text("\n".join(rows) + "\n")
