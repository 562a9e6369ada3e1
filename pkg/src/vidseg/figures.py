"""Matplotlib renderings of the report CSVs, written next to them as PNGs."""
from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .core import ClassTable
from .metrics import DensityReport, MetricsReport
from .pipeline import FrameCost
from .subn import SubNReport

_DPI = 150


def save_subn_figure(reports: Sequence[SubNReport], table: ClassTable, path: str) -> None:
    """Per-class IoU versus subsampling stride, mIoU emphasized."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    strides = [r.stride for r in reports]
    for idx, cid in enumerate(table.scored_ids):
        ys = [r.metrics.per_class_iou[idx][1] for r in reports]
        if all(y is None for y in ys):
            continue
        ax.plot(strides, [float("nan") if y is None else y for y in ys],
                marker="o", lw=1, alpha=0.7, label=table.name_of(cid))
    ax.plot(strides, [r.metrics.miou for r in reports],
            marker="s", lw=2.5, color="black", label="mIoU")
    ax.set_xscale("log", base=2)
    ax.set_xticks(strides)
    ax.set_xticklabels([str(s) for s in strides])
    ax.set_xlabel("subsampling stride")
    ax.set_ylabel("IoU")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_budget_figure(curve: Sequence[Tuple[float, float]], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = ["inf" if math.isinf(k) else str(int(k)) for k, _ in curve]
    ax.plot(range(len(curve)), [r for _, r in curve], marker="o", color="tab:blue")
    ax.set_xticks(range(len(curve)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("priming period k")
    ax.set_ylabel("relative runtime")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_metrics_figure(
    report: MetricsReport, table: ClassTable, path: str,
    relative_runtime: Optional[float] = None,
) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    names = [table.name_of(cid) for cid, _ in report.per_class_iou]
    vals = [0.0 if v is None else v for _, v in report.per_class_iou]
    present = [v is not None for _, v in report.per_class_iou]
    colors = ["tab:blue" if p else "lightgray" for p in present]
    ax.bar(range(len(names)), vals, color=colors)
    ax.axhline(report.miou, color="black", lw=1.5, ls="--",
               label=f"mIoU = {report.miou:.3f}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_ylabel("IoU")
    ax.set_ylim(0, 1.02)
    title = "per-class IoU"
    if relative_runtime is not None:
        title += f" (relative runtime {relative_runtime:.3f})"
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_density_figure(rows: Sequence[Tuple[str, DensityReport]], path: str) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    names = [n for n, _ in rows]
    xs = range(len(rows))
    ax1.bar(xs, [r.spatial_density for _, r in rows], color="tab:green")
    ax1.set_ylim(0, 1.02)
    ax1.set_ylabel("spatial density")
    ax2.bar(xs, [r.temporal_density for _, r in rows], color="tab:orange")
    ax2.set_ylabel("temporal density [Hz]")
    for ax in (ax1, ax2):
        ax.set_xticks(list(xs))
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_cost_trace_figure(
    traces: Sequence[Tuple[str, Sequence[FrameCost]]], path: str
) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, trace in traces:
        ax.step([fc.frame for fc in trace], [fc.cost for fc in trace],
                where="mid", label=name, alpha=0.8)
    ax.set_xlabel("frame")
    ax.set_ylabel("cost")
    ax.grid(True, alpha=0.3)
    if len(traces) <= 8:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
