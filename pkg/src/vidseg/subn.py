"""Subsampling control experiment: quantify the labeling ceiling of pure
downsampling by round-tripping ground truth through stride-N
subsample/upscale and scoring it against itself.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .core import ClassTable, LabelMap
from .metrics import ConfusionMatrix, MetricsReport, compute_report
from .resample import nn_subsample, nn_upscale


@dataclass(frozen=True)
class SubNReport:
    stride: int
    metrics: MetricsReport


def roundtrip_labels(gt: LabelMap, stride: int) -> LabelMap:
    """Subsample with the given stride, then upscale back to the original size."""
    return nn_upscale(nn_subsample(gt, stride), gt.height, gt.width)


def _accumulate_roundtrip(
    cm: ConfusionMatrix, gt: LabelMap, rt: LabelMap, table: ClassTable
) -> ConfusionMatrix:
    # The round-tripped map can place unknown ids onto known-gt pixels near
    # region borders; unknown pixels on either side are masked, mirroring the
    # gt-side masking used for network predictions.
    lut = table.id_to_channel()
    gt_ch = lut[gt.data]
    rt_ch = lut[rt.data]
    known = (gt_ch >= 0) & (rt_ch >= 0)
    c = table.num_scored
    flat = gt_ch[known] * c + rt_ch[known]
    add = np.bincount(flat, minlength=c * c).reshape(c, c)
    return ConfusionMatrix(cm.counts + add)


def run_subn(
    dataset: Sequence[LabelMap],
    strides: Sequence[int],
    table: ClassTable,
    threads: int = 1,
) -> List[SubNReport]:
    """One aggregated confusion matrix and report per stride."""
    if not dataset:
        raise ValueError("sub-N needs at least one label map")
    for n in strides:
        if int(n) != n or n < 1:
            raise ValueError(f"strides must be integers >= 1, got {n}")

    def one_stride(stride: int) -> SubNReport:
        cm = ConfusionMatrix.empty(table.num_scored)
        for gt in dataset:
            cm = _accumulate_roundtrip(cm, gt, roundtrip_labels(gt, stride), table)
        return SubNReport(stride=int(stride), metrics=compute_report(cm, table))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one_stride, strides))
    return [one_stride(n) for n in strides]


DEFAULT_STRIDES = (2, 4, 8, 16, 32)


def write_subn_csv(
    reports: Sequence[SubNReport], table: ClassTable, path: str
) -> None:
    """Wide layout: one row per stride, per-class IoU columns, then mIoU."""
    names = [table.name_of(cid) for cid in table.scored_ids]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stride"] + names + ["miou"])
        for rep in reports:
            vals = [
                "" if v is None else repr(float(v))
                for _, v in rep.metrics.per_class_iou
            ]
            w.writerow([str(rep.stride)] + vals + [repr(rep.metrics.miou)])
