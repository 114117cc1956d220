"""Confusion-matrix classification metrics with macro averaging."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ClassStats:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: bool = False  # a 0/0 rate was defined as 0 for this class


@dataclass
class MetricsReport:
    confusion: np.ndarray  # rows = true class, columns = predicted class
    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    per_class: list = field(default_factory=list)
    class_names: tuple = ()

    def to_dict(self):
        return {
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
            "per_class": [
                {
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                    "degenerate": c.degenerate,
                }
                for c in self.per_class
            ],
            "class_names": list(self.class_names),
        }


def _safe_rate(num, den):
    return (num / den, False) if den > 0 else (0.0, True)


def compute_metrics(truths, predictions, n_classes, class_names=()):
    """Confusion matrix, accuracy, and macro precision/recall/F1.

    Per-class rates with a zero denominator (no predictions for a class, or no
    support) are defined as 0 and flagged as degenerate.
    """
    truths = np.asarray(truths, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if truths.shape != predictions.shape or truths.ndim != 1:
        raise ValueError("truths and predictions must be equal-length 1-d sequences")
    for name, labels in (("truth", truths), ("prediction", predictions)):
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise ValueError(f"{name} label out of range [0, {n_classes})")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (truths, predictions), 1)

    n = truths.size
    accuracy = float(np.trace(confusion) / n) if n else 0.0
    per_class = []
    for c in range(n_classes):
        tp = int(confusion[c, c])
        fp = int(confusion[:, c].sum() - tp)
        fn = int(confusion[c, :].sum() - tp)
        precision, p_deg = _safe_rate(tp, tp + fp)
        recall, r_deg = _safe_rate(tp, tp + fn)
        f1, f_deg = _safe_rate(2.0 * precision * recall, precision + recall)
        per_class.append(
            ClassStats(
                precision=float(precision),
                recall=float(recall),
                f1=float(f1),
                support=tp + fn,
                degenerate=p_deg or r_deg or f_deg,
            )
        )
    return MetricsReport(
        confusion=confusion,
        accuracy=accuracy,
        precision_macro=float(np.mean([c.precision for c in per_class])),
        recall_macro=float(np.mean([c.recall for c in per_class])),
        f1_macro=float(np.mean([c.f1 for c in per_class])),
        per_class=per_class,
        class_names=tuple(class_names) or tuple(f"class_{i}" for i in range(n_classes)),
    )


def render_confusion(report: MetricsReport, normalize=False):
    """CSV text of the confusion matrix; normalized mode divides each row by
    its sum (all-zero rows stay zero)."""
    matrix = report.confusion.astype(np.float64)
    if normalize:
        sums = matrix.sum(axis=1, keepdims=True)
        matrix = np.divide(matrix, sums, out=np.zeros_like(matrix), where=sums > 0)
    names = report.class_names
    lines = ["true\\pred," + ",".join(names)]
    for i, name in enumerate(names):
        cells = (f"{v:.6g}" if normalize else str(int(v)) for v in matrix[i])
        lines.append(name + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def parse_confusion(csv_text):
    """Inverse of render_confusion: (matrix, class_names)."""
    rows = [line.split(",") for line in csv_text.strip().splitlines()]
    names = tuple(rows[0][1:])
    matrix = np.array([[float(cell) for cell in row[1:]] for row in rows[1:]])
    return matrix, names
