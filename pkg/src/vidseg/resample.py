"""Deterministic resampling kernels.

Label maps are categorical and only ever move through nearest-neighbor
subsample/upscale (top-left anchor). Images and score maps interpolate
bilinearly with the half-pixel-center convention:

    src = (dst + 0.5) * (src_len / dst_len) - 0.5, clamped to [0, src_len - 1]

which makes same-size resizing an exact identity. The convention lives in
``bilinear_axis_matrix`` and nowhere else.
"""
from __future__ import annotations

import math

import numpy as np

from .core import Image, LabelMap, ScoreMap


def nn_subsample(labels: LabelMap, stride: int) -> LabelMap:
    """Keep every stride-th pixel starting at (0, 0); output dims ceil(H/N) x ceil(W/N)."""
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be an integer >= 1, got {stride}")
    return LabelMap(labels.data[::stride, ::stride])


def nn_upscale(labels: LabelMap, target_h: int, target_w: int) -> LabelMap:
    """Nearest-neighbor upscale: out(i, j) = in(floor(i*h/H), floor(j*w/W))."""
    h, w = labels.height, labels.width
    if target_h < h or target_w < w:
        raise ValueError(
            f"target {target_h}x{target_w} smaller than source {h}x{w}"
        )
    rows = (np.arange(target_h) * h) // target_h
    cols = (np.arange(target_w) * w) // target_w
    return LabelMap(labels.data[np.ix_(rows, cols)])


def bilinear_axis_matrix(src_len: int, dst_len: int) -> np.ndarray:
    """Dense (dst_len, src_len) interpolation matrix for one axis.

    Row t holds the two source weights for target index t under the
    half-pixel-center convention; its transpose is the exact adjoint used by
    gradient code.
    """
    if src_len < 1 or dst_len < 1:
        raise ValueError("axis lengths must be >= 1")
    m = np.zeros((dst_len, src_len))
    src = (np.arange(dst_len) + 0.5) * (src_len / dst_len) - 0.5
    src = np.clip(src, 0.0, src_len - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, src_len - 1)
    frac = src - i0
    rows = np.arange(dst_len)
    m[rows, i0] += 1.0 - frac
    m[rows, i1] += frac
    return m


def resize_array(arr: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Bilinear resize of an (..., H, W, C) array along its spatial axes."""
    mh = bilinear_axis_matrix(arr.shape[-3], target_h)
    mw = bilinear_axis_matrix(arr.shape[-2], target_w)
    out = np.einsum("ih,...hwc->...iwc", mh, arr)
    return np.einsum("jw,...iwc->...ijc", mw, out)


def bilinear_resize(scores: ScoreMap, target_h: int, target_w: int) -> ScoreMap:
    """Bilinear resize of a score map, per channel."""
    if target_h < 1 or target_w < 1:
        raise ValueError(f"target dims must be >= 1, got {target_h}x{target_w}")
    return ScoreMap(resize_array(scores.data, target_h, target_w))


def downsample_image(img: Image, factor: int) -> Image:
    """Shrink an image to ceil(H/N) x ceil(W/N) with the bilinear kernel."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be an integer >= 1, got {factor}")
    th = math.ceil(img.height / factor)
    tw = math.ceil(img.width / factor)
    return Image(resize_array(img.data, th, tw))
