"""Exact-count evaluation: confusion matrices, per-class IoU, mIoU,
class-average accuracy, and annotation density statistics.

Counts are integer-exact; pixels whose ground-truth id is unknown are
excluded from every measure.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import ClassTable, LabelMap, VideoSequence, _frozen_array


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """num_scored x num_scored integer pixel counts; row = gt, column = pred."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {arr.shape}")
        if arr.size and arr.min() < 0:
            raise ValueError("confusion matrix counts must be >= 0")
        object.__setattr__(self, "counts", _frozen_array(arr))

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @staticmethod
    def empty(num_classes: int) -> "ConfusionMatrix":
        return ConfusionMatrix(np.zeros((num_classes, num_classes), dtype=np.int64))

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        """Entrywise sum; the reduction step for parallel accumulation."""
        if other.num_classes != self.num_classes:
            raise ValueError("cannot merge confusion matrices of different sizes")
        return ConfusionMatrix(self.counts + other.counts)


def accumulate(
    cm: ConfusionMatrix, gt: LabelMap, pred: LabelMap, table: ClassTable
) -> ConfusionMatrix:
    """Add one gt/pred pair of label maps into the confusion matrix.

    Pixels whose gt id is unknown are skipped entirely. Predictions must not
    contain the unknown id (networks emit only non-unknown classes).
    """
    if cm.num_classes != table.num_scored:
        raise ValueError("confusion matrix size does not match class table")
    if (gt.height, gt.width) != (pred.height, pred.width):
        raise ValueError(
            f"dimension mismatch: gt {gt.height}x{gt.width} vs pred {pred.height}x{pred.width}"
        )
    if gt.data.max() >= table.num_ids or pred.data.max() >= table.num_ids:
        raise ValueError("label map contains ids outside the class table")
    if np.any(pred.data == table.unknown_id):
        raise ValueError(f"prediction contains unknown id {table.unknown_id}")

    lut = table.id_to_channel()
    gt_ch = lut[gt.data]
    pred_ch = lut[pred.data]
    known = gt_ch >= 0
    c = table.num_scored
    flat = gt_ch[known] * c + pred_ch[known]
    add = np.bincount(flat, minlength=c * c).reshape(c, c)
    return ConfusionMatrix(cm.counts + add)


def iou(cm: ConfusionMatrix) -> List[Optional[float]]:
    """Per-channel IoU = TP / (TP + FP + FN); None where the denominator is 0."""
    counts = cm.counts
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    denom = tp + fp + fn
    out: List[Optional[float]] = []
    for c in range(cm.num_classes):
        out.append(None if denom[c] == 0 else float(tp[c]) / float(denom[c]))
    return out


def miou(cm: ConfusionMatrix) -> float:
    """Unweighted mean of the present per-class IoU values."""
    vals = [v for v in iou(cm) if v is not None]
    if not vals:
        raise ValueError("mIoU undefined: every class has an empty denominator")
    return float(sum(vals) / len(vals))


def per_class_accuracy(cm: ConfusionMatrix) -> List[Optional[float]]:
    """Per-channel recall = TP / gt row sum; None where the class never occurs."""
    counts = cm.counts
    tp = np.diag(counts)
    row = counts.sum(axis=1)
    return [
        None if row[c] == 0 else float(tp[c]) / float(row[c])
        for c in range(cm.num_classes)
    ]


def class_avg_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall over classes that occur in the ground truth."""
    vals = [v for v in per_class_accuracy(cm) if v is not None]
    if not vals:
        raise ValueError("class-average accuracy undefined: all gt rows are empty")
    return float(sum(vals) / len(vals))


@dataclass(frozen=True)
class MetricsReport:
    """Per-class and aggregate quality numbers for one evaluation.

    Entries are (class id, value) with value None for absent classes
    (zero denominator); absent classes are excluded from the means.
    """

    per_class_iou: Tuple[Tuple[int, Optional[float]], ...]
    miou: float
    per_class_accuracy: Tuple[Tuple[int, Optional[float]], ...]
    class_avg_accuracy: float


def compute_report(cm: ConfusionMatrix, table: ClassTable) -> MetricsReport:
    ids = table.scored_ids
    return MetricsReport(
        per_class_iou=tuple(zip(ids, iou(cm))),
        miou=miou(cm),
        per_class_accuracy=tuple(zip(ids, per_class_accuracy(cm))),
        class_avg_accuracy=class_avg_accuracy(cm),
    )


@dataclass(frozen=True)
class DensityReport:
    """Annotation density: spatial fraction in [0,1] and temporal rate in Hz."""

    spatial_density: float
    temporal_density: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.spatial_density <= 1.0):
            raise ValueError(f"spatial density out of [0,1]: {self.spatial_density}")
        if self.temporal_density < 0.0:
            raise ValueError(f"temporal density must be >= 0: {self.temporal_density}")


def spatial_density(labels: Sequence[LabelMap], table: ClassTable) -> float:
    """Fraction of pixels across all maps whose id is not unknown."""
    if not labels:
        raise ValueError("spatial density needs at least one label map")
    known = 0
    total = 0
    for lm in labels:
        known += int(np.count_nonzero(lm.data != table.unknown_id))
        total += lm.data.size
    return known / total


def temporal_density(seq: VideoSequence) -> float:
    """Annotated frames per second: (annotated count - 1) / annotated span.

    Returns 0.0 when fewer than 2 frames carry labels.
    """
    if len(seq) < 2:
        raise ValueError("temporal density needs at least 2 frames")
    stamps = [fr.timestamp for fr in seq.frames if fr.label is not None]
    if len(stamps) < 2:
        return 0.0
    span = stamps[-1] - stamps[0]
    if span <= 0:
        raise ValueError("annotated timestamps must span a positive interval")
    return (len(stamps) - 1) / span


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def write_metrics_csv(
    report: MetricsReport,
    table: ClassTable,
    path: str,
    relative_runtime: Optional[float] = None,
) -> None:
    """One row per class, then a summary row; stable byte-level output.

    Columns: class_id, class_name, iou, accuracy[, relative_runtime]. The
    summary row carries class_id "mean" with mIoU and class-average accuracy
    (and the relative runtime when one applies).
    """
    acc = dict(report.per_class_accuracy)
    header = ["class_id", "class_name", "iou", "accuracy"]
    if relative_runtime is not None:
        header.append("relative_runtime")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for cid, val in report.per_class_iou:
            row = [str(cid), table.name_of(cid), _fmt(val), _fmt(acc.get(cid))]
            if relative_runtime is not None:
                row.append("")
            w.writerow(row)
        summary = ["mean", "", _fmt(report.miou), _fmt(report.class_avg_accuracy)]
        if relative_runtime is not None:
            summary.append(_fmt(relative_runtime))
        w.writerow(summary)


def write_density_csv(
    rows: Sequence[Tuple[str, DensityReport]], path: str
) -> None:
    """One row per named report; callers usually append an "overall" entry."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sequence", "spatial_density", "temporal_density"])
        for name, rep in rows:
            w.writerow([name, repr(rep.spatial_density), repr(rep.temporal_density)])
