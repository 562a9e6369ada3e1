"""Masked softmax cross-entropy over non-unknown pixels."""
from __future__ import annotations

from typing import Tuple, Union

import numpy as np

from ..core import ClassTable, LabelMap, ScoreMap


def masked_cross_entropy_batch(
    scores: np.ndarray, labels: np.ndarray, table: ClassTable
) -> Tuple[float, np.ndarray]:
    """Cross-entropy averaged over non-unknown pixels of a (B, H, W, C) batch.

    Returns (loss, d_loss/d_scores). Unknown pixels contribute nothing and
    receive zero gradient; an all-unknown batch gives loss 0 and zero grad.
    """
    if scores.shape[:3] != labels.shape:
        raise ValueError(
            f"scores {scores.shape} and labels {labels.shape} disagree on pixels"
        )
    if scores.shape[3] != table.num_scored:
        raise ValueError(
            f"scores have {scores.shape[3]} channels, table defines {table.num_scored}"
        )
    if labels.max() >= table.num_ids:
        raise ValueError("labels contain ids outside the class table")
    ch = table.id_to_channel()[labels]  # (B, H, W), -1 at unknown
    mask = ch >= 0
    m = int(np.count_nonzero(mask))
    if m == 0:
        return 0.0, np.zeros_like(scores)

    z = scores - scores.max(axis=3, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=3, keepdims=True))
    logp = z - lse  # (B, H, W, C)

    safe_ch = np.where(mask, ch, 0)
    picked = np.take_along_axis(logp, safe_ch[..., None], axis=3)[..., 0]
    loss = -float(picked[mask].sum()) / m

    grad = np.exp(logp)
    onehot = np.zeros_like(grad)
    np.put_along_axis(onehot, safe_ch[..., None], 1.0, axis=3)
    grad = (grad - onehot) / m
    grad[~mask] = 0.0
    return loss, grad


def masked_cross_entropy(
    scores: Union[ScoreMap, np.ndarray], gt: LabelMap, table: ClassTable
) -> Tuple[float, np.ndarray]:
    """Single-map wrapper; returns (loss, gradient with the map's shape)."""
    arr = scores.data if isinstance(scores, ScoreMap) else np.asarray(scores, dtype=np.float64)
    loss, grad = masked_cross_entropy_batch(arr[None], gt.data[None], table)
    return loss, grad[0]
