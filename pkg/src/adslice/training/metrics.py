"""Confusion matrix, per-class scores, one-vs-rest ROC and the evaluation report."""
import json
from dataclasses import dataclass, field

import numpy as np

from .. import CLASS_NAMES


def confusion_matrix(labels, predictions, num_classes):
    """Rows are true classes, columns predicted classes."""
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels, dtype=np.int64), np.asarray(predictions, dtype=np.int64)), 1)
    return cm


def per_class_scores(cm):
    """``(precision, recall, f1)`` lists; a ratio with a zero denominator is 0."""
    cm = np.asarray(cm)
    tp = np.diag(cm).astype(np.float64)
    predicted, actual = cm.sum(axis=0), cm.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return precision.tolist(), recall.tolist(), f1.tolist()


def roc_curve(scores, positive):
    """One ROC curve from a threshold sweep over ``scores``.

    Thresholds run over the distinct scores from high to low; tied scores
    enter together.  Returns ``(fpr, tpr)`` lists starting at (0, 0) and
    ending at (1, 1), or ``None`` when either class is absent.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], positive[order]
    tp, fp = np.cumsum(y), np.cumsum(~y)
    # last index of each run of equal scores
    ends = np.append(np.nonzero(np.diff(s))[0], s.size - 1)
    fpr = np.concatenate([[0.0], fp[ends] / n_neg])
    tpr = np.concatenate([[0.0], tp[ends] / n_pos])
    return fpr.tolist(), tpr.tolist()


def auc(fpr, tpr):
    """Trapezoidal area under a piecewise-linear curve."""
    x, y = np.asarray(fpr), np.asarray(tpr)
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2))


@dataclass
class EvalReport:
    confusion: list
    accuracy: float
    precision: list
    recall: list
    f1: list
    roc: list          # per class: {"fpr": [...], "tpr": [...], "auc": float} or None
    macro_auc: float
    loss: float
    class_names: list = field(default_factory=lambda: list(CLASS_NAMES))
    curves: dict = field(default_factory=dict)

    @property
    def num_samples(self):
        return int(np.sum(self.confusion))

    def to_dict(self):
        return {
            "class_names": self.class_names,
            "num_samples": self.num_samples,
            "accuracy": self.accuracy,
            "loss": self.loss,
            "confusion": self.confusion,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "macro_auc": self.macro_auc,
            "roc": self.roc,
            "curves": self.curves,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(d["confusion"], d["accuracy"], d["precision"], d["recall"], d["f1"],
                   d["roc"], d["macro_auc"], d["loss"], d["class_names"], d.get("curves", {}))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def summary(self):
        lines = [f"accuracy {self.accuracy:.4f}  loss {self.loss:.4f}  macro AUC "
                 + ("n/a" if self.macro_auc is None else f"{self.macro_auc:.4f}")]
        width = max(len(c) for c in self.class_names)
        lines.append(" " * (width + 2) + " ".join(f"{c:>{max(width, 5)}}" for c in self.class_names))
        for name, row in zip(self.class_names, self.confusion):
            lines.append(f"{name:>{width}}  " + " ".join(f"{v:>{max(width, 5)}d}" for v in row))
        return "\n".join(lines)


def report_from_scores(probabilities, labels, loss=float("nan"), class_names=None):
    """Build an EvalReport from softmax scores (N, n) and integer labels.

    Prediction is the argmax; ties go to the lowest class index.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = p.shape[1]
    cm = confusion_matrix(labels, np.argmax(p, axis=1), n)
    total = int(cm.sum())
    accuracy = int(np.trace(cm)) / total if total else 0.0
    precision, recall, f1 = per_class_scores(cm)
    roc, aucs = [], []
    for c in range(n):
        curve = roc_curve(p[:, c], labels == c)
        if curve is None:
            roc.append(None)
            continue
        a = auc(*curve)
        aucs.append(a)
        roc.append({"fpr": curve[0], "tpr": curve[1], "auc": a})
    names = list(class_names) if class_names is not None else list(CLASS_NAMES[:n])
    return EvalReport(cm.tolist(), accuracy, precision, recall, f1, roc,
                      float(np.mean(aucs)) if aucs else None, float(loss), names)
