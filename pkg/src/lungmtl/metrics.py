"""Evaluation artifacts: confusion matrices, classification reports,
one-vs-rest ROC/AUC, and training-history tables.

Everything is computed from first principles on integer tallies so each
value can be cross-checked against brute-force oracles.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyMatrixError,
    LabelOutOfRangeError,
    ShapeMismatchError,
    SingleClassOnlyError,
)


@dataclass
class ConfusionMatrix:
    """counts[t][p] = examples of true class t predicted as p."""
    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, class_names=None) -> str:
        names = class_names or [str(i) for i in range(self.n_classes)]
        lines = ["true\\pred," + ",".join(names)]
        for i in range(self.n_classes):
            lines.append(names[i] + ","
                         + ",".join(str(int(v)) for v in self.counts[i]))
        return "\n".join(lines) + "\n"


@dataclass
class EvalReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    wall_time_s: float = 0.0

    def to_text(self, class_names=None) -> str:
        """Fixed-width table: per-class rows, then accuracy and averages."""
        k = len(self.support)
        names = class_names or [str(i) for i in range(k)]
        width = max(12, max(len(n) for n in names))
        out = io.StringIO()
        out.write(f"{'':>{width}}  precision    recall  f1-score   support\n\n")
        for i in range(k):
            out.write(f"{names[i]:>{width}}  {self.precision[i]:9.2f} "
                      f"{self.recall[i]:9.2f} {self.f1[i]:9.2f} "
                      f"{int(self.support[i]):9d}\n")
        total = int(self.support.sum())
        out.write(f"\n{'accuracy':>{width}}  {'':9} {'':9} "
                  f"{self.accuracy:9.2f} {total:9d}\n")
        out.write(f"{'macro avg':>{width}}  {self.macro_precision:9.2f} "
                  f"{self.macro_recall:9.2f} {self.macro_f1:9.2f} {total:9d}\n")
        out.write(f"{'weighted avg':>{width}}  {self.weighted_precision:9.2f} "
                  f"{self.weighted_recall:9.2f} {self.weighted_f1:9.2f} "
                  f"{total:9d}\n")
        if self.wall_time_s:
            out.write(f"\nwall time: {self.wall_time_s:.3f} s\n")
        return out.getvalue()

    def to_csv(self, class_names=None) -> str:
        k = len(self.support)
        names = class_names or [str(i) for i in range(k)]
        lines = ["class,precision,recall,f1,support"]
        for i in range(k):
            lines.append(f"{names[i]},{self.precision[i]!r},{self.recall[i]!r},"
                         f"{self.f1[i]!r},{int(self.support[i])}")
        total = int(self.support.sum())
        lines.append(f"accuracy,,,{self.accuracy!r},{total}")
        lines.append(f"macro avg,{self.macro_precision!r},{self.macro_recall!r},"
                     f"{self.macro_f1!r},{total}")
        lines.append(f"weighted avg,{self.weighted_precision!r},"
                     f"{self.weighted_recall!r},{self.weighted_f1!r},{total}")
        return "\n".join(lines) + "\n"


@dataclass
class RocCurve:
    """One-vs-rest curves; degenerate classes carry None instead of 0."""
    fpr: list = field(default_factory=list)   # per class: array or None
    tpr: list = field(default_factory=list)
    auc: list = field(default_factory=list)   # per class: float or None
    macro_auc: float = 0.0

    def to_csv(self, class_names=None) -> str:
        k = len(self.auc)
        names = class_names or [str(i) for i in range(k)]
        lines = ["class,fpr,tpr"]
        for i in range(k):
            if self.fpr[i] is None:
                continue
            for x, y in zip(self.fpr[i], self.tpr[i]):
                lines.append(f"{names[i]},{x!r},{y!r}")
        lines.append("")
        lines.append("class,auc")
        for i in range(k):
            lines.append(f"{names[i]},{'' if self.auc[i] is None else repr(self.auc[i])}")
        lines.append(f"macro avg,{self.macro_auc!r}")
        return "\n".join(lines) + "\n"


def confusion(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    """Tally true/predicted label pairs into a K x K grid."""
    y_true = np.asarray(y_true, dtype=np.intp).ravel()
    y_pred = np.asarray(y_pred, dtype=np.intp).ravel()
    if y_true.shape != y_pred.shape:
        raise ShapeMismatchError(
            f"label lengths differ: {y_true.shape[0]} vs {y_pred.shape[0]}")
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise LabelOutOfRangeError(
                f"{name} labels must lie in [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def report(cm: ConfusionMatrix, wall_time_s: float = 0.0) -> EvalReport:
    """Precision/recall/F1/support per class plus accuracy and averages.

    Zero-denominator cells score 0 by convention; tiny or absent classes
    must not raise. The summary row is support-weighted; macro averages
    (unweighted over all classes) are also included.
    """
    counts = np.asarray(cm.counts, dtype=np.float64)
    total = counts.sum()
    if total == 0:
        raise EmptyMatrixError("confusion matrix has no examples")
    diag = np.diag(counts)
    colsum = counts.sum(axis=0)
    rowsum = counts.sum(axis=1)
    precision = np.divide(diag, colsum, out=np.zeros_like(diag), where=colsum > 0)
    recall = np.divide(diag, rowsum, out=np.zeros_like(diag), where=rowsum > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros_like(diag), where=pr > 0)
    support = rowsum.astype(np.int64)
    weights = rowsum / total
    return EvalReport(
        precision=precision, recall=recall, f1=f1, support=support,
        accuracy=float(np.trace(counts) / total),
        weighted_precision=float(weights @ precision),
        weighted_recall=float(weights @ recall),
        weighted_f1=float(weights @ f1),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        wall_time_s=float(wall_time_s),
    )


def _binary_roc(scores, positive):
    """Threshold sweep with tied scores grouped into one step.

    Returns (fpr, tpr, auc) or None when the class has no positives or no
    negatives (AUC undefined).
    """
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_pos = positive[order]
    tp = np.cumsum(sorted_pos)
    fp = np.cumsum(~sorted_pos)
    # keep only the last index of each tie group
    boundary = np.r_[np.flatnonzero(np.diff(sorted_scores) != 0),
                     scores.size - 1]
    tpr = np.r_[0.0, tp[boundary] / n_pos]
    fpr = np.r_[0.0, fp[boundary] / n_neg]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return fpr, tpr, auc


def roc_auc(y_true, probs) -> RocCurve:
    """One-vs-rest ROC per class, trapezoidal AUC, macro average.

    Classes without both positives and negatives are reported absent
    (None); if every class is degenerate there is nothing to average and
    SingleClassOnly is raised.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeMismatchError(f"probs must be (N,K), got {probs.shape}")
    y_true = np.asarray(y_true, dtype=np.intp).ravel()
    if y_true.shape[0] != probs.shape[0]:
        raise ShapeMismatchError(
            f"{y_true.shape[0]} labels for {probs.shape[0]} probability rows")
    k = probs.shape[1]
    if y_true.size and (y_true.min() < 0 or y_true.max() >= k):
        raise LabelOutOfRangeError(f"labels must lie in [0, {k})")
    curve = RocCurve()
    defined = []
    for cls in range(k):
        res = _binary_roc(probs[:, cls], y_true == cls)
        if res is None:
            curve.fpr.append(None)
            curve.tpr.append(None)
            curve.auc.append(None)
        else:
            fpr, tpr, auc = res
            curve.fpr.append(fpr)
            curve.tpr.append(tpr)
            curve.auc.append(auc)
            defined.append(auc)
    if not defined:
        raise SingleClassOnlyError(
            "every one-vs-rest split is single-class; AUC undefined")
    curve.macro_auc = float(np.mean(defined))
    return curve


# --- training history -------------------------------------------------------

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "sound_acc", "disease_acc")


def history_dump(history) -> str:
    """Render per-epoch records as CSV with a fixed column order.

    Floats are written with repr so the table round-trips exactly; a
    missing val_loss is an empty cell.
    """
    if not history:
        raise ValueError("history is empty")
    lines = [",".join(HISTORY_COLUMNS)]
    for rec in history:
        cells = [str(int(rec["epoch"]))]
        for col in HISTORY_COLUMNS[1:]:
            value = rec.get(col)
            cells.append("" if value is None else repr(float(value)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def history_load(text: str):
    """Inverse of history_dump; '#' lines (CLI config echo) are skipped."""
    lines = [ln for ln in text.splitlines()
             if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != ",".join(HISTORY_COLUMNS):
        raise ValueError("not a history table")
    out = []
    for line in lines[1:]:
        cells = line.split(",")
        rec = {"epoch": int(cells[0])}
        for col, cell in zip(HISTORY_COLUMNS[1:], cells[1:]):
            rec[col] = None if cell == "" else float(cell)
        out.append(rec)
    return out
