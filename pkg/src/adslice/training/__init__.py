"""Training loop, class weighting and evaluation reports."""
from .config import TrainConfig
from .export import export_curves, read_table
from .loop import as_arrays, class_weights, evaluate, train
from .metrics import EvalReport, auc, confusion_matrix, per_class_scores, report_from_scores, roc_curve

__all__ = [
    "TrainConfig", "train", "evaluate", "class_weights", "as_arrays",
    "EvalReport", "report_from_scores", "confusion_matrix", "per_class_scores",
    "roc_curve", "auc", "export_curves", "read_table",
]
