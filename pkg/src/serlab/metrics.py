"""Confusion matrices, Accuracy, UAR and Macro-F1."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricError


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merged(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.class_names != other.class_names:
            raise MetricError("cannot merge matrices over different classes")
        return ConfusionMatrix(counts=self.counts + other.counts,
                               class_names=self.class_names)


def confusion_matrix(true_labels, pred_labels,
                     num_classes: int,
                     class_names: tuple[str, ...] | None = None
                     ) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(pred_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise MetricError(f"label arrays differ in length: {t.shape} vs "
                          f"{p.shape}")
    if t.size and (t.min() < 0 or t.max() >= num_classes
                   or p.min() < 0 or p.max() >= num_classes):
        raise MetricError(f"labels must lie in [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    names = class_names or tuple(str(i) for i in range(num_classes))
    return ConfusionMatrix(counts=counts, class_names=names)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise MetricError("accuracy undefined on an empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


@dataclass
class MetricWarnings:
    zero_support_classes: list[str] = field(default_factory=list)
    zero_f1_classes: list[str] = field(default_factory=list)


def uar(cm: ConfusionMatrix,
        warnings: MetricWarnings | None = None) -> float:
    """Unweighted average recall; classes with no true samples are
    excluded from the mean and flagged."""
    if cm.total == 0:
        raise MetricError("UAR undefined on an empty confusion matrix")
    recalls = []
    for i, name in enumerate(cm.class_names):
        support = cm.counts[i].sum()
        if support == 0:
            if warnings is not None:
                warnings.zero_support_classes.append(name)
            continue
        recalls.append(cm.counts[i, i] / support)
    if not recalls:
        raise MetricError("UAR undefined: every class has zero support")
    return float(np.mean(recalls))


def macro_f1(cm: ConfusionMatrix,
             warnings: MetricWarnings | None = None) -> float:
    """Unweighted mean over classes of t_p / (t_p + (f_p + f_n)/2).

    A class with t_p = f_p = f_n = 0 contributes F1 = 0 and is flagged.
    """
    if cm.total == 0:
        raise MetricError("Macro-F1 undefined on an empty confusion matrix")
    f1s = []
    for i, name in enumerate(cm.class_names):
        tp = cm.counts[i, i]
        fn = cm.counts[i].sum() - tp
        fp = cm.counts[:, i].sum() - tp
        if tp + fp + fn == 0:
            if warnings is not None:
                warnings.zero_f1_classes.append(name)
            f1s.append(0.0)
            continue
        f1s.append(tp / (tp + 0.5 * (fp + fn)))
    return float(np.mean(f1s))


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    accuracy: float
    uar: float
    macro_f1: float
    warnings: MetricWarnings
    per_sample: list[tuple[str, int, int]] = field(default_factory=list)
    # (sample id, true class, predicted class)


def build_report(ids, true_labels, pred_labels,
                 class_names: tuple[str, ...]) -> EvalReport:
    cm = confusion_matrix(true_labels, pred_labels, len(class_names),
                          class_names)
    warnings = MetricWarnings()
    return EvalReport(confusion=cm,
                      accuracy=accuracy(cm),
                      uar=uar(cm, warnings),
                      macro_f1=macro_f1(cm, warnings),
                      warnings=warnings,
                      per_sample=list(zip(ids, map(int, true_labels),
                                          map(int, pred_labels))))


def write_metrics_csv(path, report: EvalReport):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "value"])
        writer.writerow(["accuracy", f"{report.accuracy:.10g}"])
        writer.writerow(["uar", f"{report.uar:.10g}"])
        writer.writerow(["macro_f1", f"{report.macro_f1:.10g}"])


def write_confusion_csv(path, cm: ConfusionMatrix):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["true\\pred"] + list(cm.class_names))
        for name, row in zip(cm.class_names, cm.counts):
            writer.writerow([name] + [int(v) for v in row])


def write_confusion_png(path, cm: ConfusionMatrix) -> bool:
    """Heatmap of the (row-normalized) confusion matrix. Returns False if
    matplotlib is unavailable."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    totals = cm.counts.sum(axis=1, keepdims=True)
    norm = np.divide(cm.counts, totals, out=np.zeros(cm.counts.shape),
                     where=totals > 0)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(norm, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(len(cm.class_names)), cm.class_names, rotation=45,
                  ha="right")
    ax.set_yticks(range(len(cm.class_names)), cm.class_names)
    for i in range(len(cm.class_names)):
        for j in range(len(cm.class_names)):
            ax.text(j, i, str(int(cm.counts[i, j])), ha="center",
                    va="center",
                    color="white" if norm[i, j] > 0.5 else "black")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True
