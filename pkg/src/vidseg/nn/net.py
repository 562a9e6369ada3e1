"""Network container: ordered layer stack, parameter init, forward/backward."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from ..core import Image, ScoreMap
from ..errors import NumericError
from .layers import CONV, LayerSpec, layer_backward, layer_forward

ParamPair = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class NetSpec:
    """Fully convolutional stack; channel counts must chain correctly."""

    in_channels: int
    layers: Tuple[LayerSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.in_channels < 1:
            raise ValueError("in_channels must be >= 1")
        if not self.layers:
            raise ValueError("network needs at least one layer")
        cur = self.in_channels
        for i, layer in enumerate(self.layers):
            if layer.kind == CONV:
                if layer.in_channels != cur:
                    raise ValueError(
                        f"layer {i}: conv expects {layer.in_channels} channels "
                        f"but receives {cur}"
                    )
                cur = layer.out_channels
            elif layer.kind == "concat_input":
                cur += self.in_channels

    @property
    def out_channels(self) -> int:
        cur = self.in_channels
        for layer in self.layers:
            if layer.kind == CONV:
                cur = layer.out_channels
            elif layer.kind == "concat_input":
                cur += self.in_channels
        return cur


@dataclass(frozen=True)
class NetParams:
    """Per-layer (weight, bias) pairs aligned with the spec; None for
    parameterless layers. Arrays are read-only."""

    tensors: Tuple[Optional[ParamPair], ...]

    def __post_init__(self) -> None:
        frozen = []
        for pair in self.tensors:
            if pair is None:
                frozen.append(None)
                continue
            w, b = pair
            w = np.asarray(w, dtype=np.float64).copy()
            b = np.asarray(b, dtype=np.float64).copy()
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("parameters contain non-finite values")
            w.flags.writeable = False
            b.flags.writeable = False
            frozen.append((w, b))
        object.__setattr__(self, "tensors", tuple(frozen))


@dataclass(frozen=True)
class Network:
    spec: NetSpec
    params: NetParams


def init_params(spec: NetSpec, seed: int) -> NetParams:
    """Fan-in-scaled normal weights (std sqrt(2/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    tensors: List[Optional[ParamPair]] = []
    for layer in spec.layers:
        if layer.kind != CONV:
            tensors.append(None)
            continue
        shape = (layer.kernel, layer.kernel, layer.in_channels, layer.out_channels)
        fan_in = layer.kernel * layer.kernel * layer.in_channels
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        b = np.zeros(layer.out_channels)
        tensors.append((w, b))
    return NetParams(tuple(tensors))


def check_params(spec: NetSpec, params: NetParams) -> None:
    if len(params.tensors) != len(spec.layers):
        raise ValueError(
            f"params cover {len(params.tensors)} layers, spec has {len(spec.layers)}"
        )
    for i, (layer, pair) in enumerate(zip(spec.layers, params.tensors)):
        if layer.kind == CONV:
            if pair is None:
                raise ValueError(f"layer {i}: conv is missing parameters")
            w, b = pair
            want = (layer.kernel, layer.kernel, layer.in_channels, layer.out_channels)
            if w.shape != want or b.shape != (layer.out_channels,):
                raise ValueError(
                    f"layer {i}: parameter shapes {w.shape}/{b.shape} do not match {want}"
                )
        elif pair is not None:
            raise ValueError(f"layer {i}: {layer.kind} takes no parameters")


def forward_batch(
    spec: NetSpec, params: NetParams, xb: np.ndarray
) -> Tuple[np.ndarray, list]:
    """Run the stack on a (B, H, W, C) batch; returns (scores, cache)."""
    check_params(spec, params)
    xb = np.asarray(xb, dtype=np.float64)
    if xb.ndim != 4 or xb.shape[3] != spec.in_channels:
        raise ValueError(
            f"input shape {xb.shape} does not match {spec.in_channels} channels"
        )
    caches = []
    x = xb
    for layer, pair in zip(spec.layers, params.tensors):
        x, cache = layer_forward(layer, pair, x, xb)
        caches.append(cache)
    if not np.all(np.isfinite(x)):
        raise NumericError("network produced non-finite scores")
    return x, caches


def backward_batch(
    spec: NetSpec,
    params: NetParams,
    caches: list,
    dy: np.ndarray,
) -> Tuple[Tuple[Optional[ParamPair], ...], np.ndarray]:
    """Exact gradients of forward_batch: (per-layer grads, d_input)."""
    if len(caches) != len(spec.layers):
        raise ValueError("forward cache does not match the layer stack")
    grads: List[Optional[ParamPair]] = [None] * len(spec.layers)
    d_input_extra = None
    dx = dy
    for i in range(len(spec.layers) - 1, -1, -1):
        dx, g, d_in = layer_backward(spec.layers[i], params.tensors[i], caches[i], dx)
        grads[i] = g
        if d_in is not None:
            d_input_extra = d_in if d_input_extra is None else d_input_extra + d_in
    if d_input_extra is not None:
        dx = dx + d_input_extra
    return tuple(grads), dx


ArrayLike = Union[Image, ScoreMap, np.ndarray]


def _as_array(x: ArrayLike) -> np.ndarray:
    if isinstance(x, (Image, ScoreMap)):
        return x.data
    return np.asarray(x, dtype=np.float64)


def forward(spec: NetSpec, params: NetParams, x: ArrayLike) -> Tuple[ScoreMap, list]:
    """Single-input forward; shares the batched kernels bit-for-bit."""
    y, caches = forward_batch(spec, params, _as_array(x)[None])
    return ScoreMap(y[0]), caches
