"""Layer primitives on batched (B, H, W, C) float64 arrays.

Each layer has a forward returning (output, cache) and a backward taking
(cache, dy) and returning the exact gradients of the forward map. Kinds:

    conv          3x3 (any dilation, zero padding preserves size) or 1x1
    relu          elementwise max(x, 0)
    downsample2   keep every second pixel from (0, 0); ceil-halves dims
    bilinear_up   half-pixel bilinear upsampling by an integer factor
    concat_input  append the network input along the channel axis
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from ..resample import bilinear_axis_matrix

CONV = "conv"
RELU = "relu"
DOWNSAMPLE2 = "downsample2"
BILINEAR_UP = "bilinear_up"
CONCAT_INPUT = "concat_input"

KINDS = (CONV, RELU, DOWNSAMPLE2, BILINEAR_UP, CONCAT_INPUT)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    dilation: int = 1
    factor: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == CONV:
            if self.kernel not in (1, 3):
                raise ValueError(f"conv kernel must be 1 or 3, got {self.kernel}")
            if self.in_channels < 1 or self.out_channels < 1:
                raise ValueError("conv channel counts must be >= 1")
            if self.dilation < 1:
                raise ValueError(f"dilation must be >= 1, got {self.dilation}")
            if self.kernel == 1 and self.dilation != 1:
                raise ValueError("1x1 conv cannot dilate")
        elif self.kind == BILINEAR_UP:
            if self.factor < 1:
                raise ValueError(f"upsample factor must be >= 1, got {self.factor}")


def conv(in_channels: int, out_channels: int, kernel: int = 3, dilation: int = 1) -> LayerSpec:
    return LayerSpec(CONV, in_channels=in_channels, out_channels=out_channels,
                     kernel=kernel, dilation=dilation)


def relu() -> LayerSpec:
    return LayerSpec(RELU)


def downsample2() -> LayerSpec:
    return LayerSpec(DOWNSAMPLE2)


def bilinear_up(factor: int = 2) -> LayerSpec:
    return LayerSpec(BILINEAR_UP, factor=factor)


def concat_input() -> LayerSpec:
    return LayerSpec(CONCAT_INPUT)


@lru_cache(maxsize=64)
def _axis_matrix(src_len: int, dst_len: int) -> np.ndarray:
    m = bilinear_axis_matrix(src_len, dst_len)
    m.flags.writeable = False
    return m


def conv_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int
) -> np.ndarray:
    kh, kw, cin, cout = w.shape
    bsz, h, wd, _ = x.shape
    if x.shape[3] != cin:
        raise ValueError(f"conv expects {cin} input channels, got {x.shape[3]}")
    if kh == 1:
        return (x.reshape(-1, cin) @ w[0, 0] + b).reshape(bsz, h, wd, cout)
    pad = dilation
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    y = np.tile(b, (bsz, h, wd, 1))
    for u in range(kh):
        for v in range(kw):
            xs = xp[:, u * dilation : u * dilation + h, v * dilation : v * dilation + wd, :]
            y += (xs.reshape(-1, cin) @ w[u, v]).reshape(bsz, h, wd, cout)
    return y


def conv_backward(
    x: np.ndarray, w: np.ndarray, dilation: int, dy: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    kh, kw, cin, cout = w.shape
    bsz, h, wd, _ = x.shape
    db = dy.sum(axis=(0, 1, 2))
    dyf = dy.reshape(-1, cout)
    if kh == 1:
        dw = np.zeros_like(w)
        dw[0, 0] = x.reshape(-1, cin).T @ dyf
        dx = (dyf @ w[0, 0].T).reshape(x.shape)
        return dx, dw, db
    pad = dilation
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for u in range(kh):
        for v in range(kw):
            sl = np.s_[:, u * dilation : u * dilation + h, v * dilation : v * dilation + wd, :]
            dw[u, v] = xp[sl].reshape(-1, cin).T @ dyf
            dxp[sl] += (dyf @ w[u, v].T).reshape(bsz, h, wd, cin)
    dx = dxp[:, pad : pad + h, pad : pad + wd, :]
    return dx, dw, db


def layer_forward(
    spec: LayerSpec,
    params: Optional[Tuple[np.ndarray, np.ndarray]],
    x: np.ndarray,
    net_input: np.ndarray,
) -> Tuple[np.ndarray, tuple]:
    """Run one layer; returns (output, cache for backward)."""
    if spec.kind == CONV:
        w, b = params  # type: ignore[misc]
        return conv_forward(x, w, b, spec.dilation), (x,)
    if spec.kind == RELU:
        return np.maximum(x, 0.0), (x > 0.0,)
    if spec.kind == DOWNSAMPLE2:
        return np.ascontiguousarray(x[:, ::2, ::2, :]), (x.shape,)
    if spec.kind == BILINEAR_UP:
        h, w_ = x.shape[1], x.shape[2]
        mh = _axis_matrix(h, h * spec.factor)
        mw = _axis_matrix(w_, w_ * spec.factor)
        y = np.einsum("ih,bhwc->biwc", mh, x)
        y = np.einsum("jw,biwc->bijc", mw, y)
        return y, (h, w_)
    if spec.kind == CONCAT_INPUT:
        if x.shape[1:3] != net_input.shape[1:3]:
            raise ValueError(
                f"concat_input needs matching spatial dims, got {x.shape[1:3]} "
                f"vs input {net_input.shape[1:3]}"
            )
        return np.concatenate([x, net_input], axis=3), (x.shape[3],)
    raise ValueError(f"unknown layer kind {spec.kind!r}")


def layer_backward(
    spec: LayerSpec,
    params: Optional[Tuple[np.ndarray, np.ndarray]],
    cache: tuple,
    dy: np.ndarray,
) -> Tuple[np.ndarray, Optional[Tuple[np.ndarray, np.ndarray]], Optional[np.ndarray]]:
    """Gradients of one layer: (dx, (dw, db) or None, d_net_input or None)."""
    if spec.kind == CONV:
        w, _ = params  # type: ignore[misc]
        (x,) = cache
        dx, dw, db = conv_backward(x, w, spec.dilation, dy)
        return dx, (dw, db), None
    if spec.kind == RELU:
        (mask,) = cache
        return dy * mask, None, None
    if spec.kind == DOWNSAMPLE2:
        (in_shape,) = cache
        dx = np.zeros(in_shape)
        dx[:, ::2, ::2, :] = dy
        return dx, None, None
    if spec.kind == BILINEAR_UP:
        h, w_ = cache
        mh = _axis_matrix(h, h * spec.factor)
        mw = _axis_matrix(w_, w_ * spec.factor)
        dx = np.einsum("jw,bijc->biwc", mw, dy)
        dx = np.einsum("ih,biwc->bhwc", mh, dx)
        return dx, None, None
    if spec.kind == CONCAT_INPUT:
        (split,) = cache
        return dy[..., :split], None, dy[..., split:]
    raise ValueError(f"unknown layer kind {spec.kind!r}")
