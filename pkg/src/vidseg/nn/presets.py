"""Default network architectures.

Three roles, sized for CPU training on small frames:

  * priming: the large, accurate per-frame segmenter (8 convs, one
    stride-2 stage with dilated 3x3 convs in the middle, bilinear head
    back to full resolution),
  * approximating: a small 4-conv net run on a downsampled frame,
  * ensemble: a thin fusion net combining previous-frame scores with the
    upsampled current approximation (3x3 conv -> relu -> 1x1 conv).
"""
from __future__ import annotations

import numpy as np

from .layers import bilinear_up, conv, downsample2, relu
from .net import NetParams, NetSpec, init_params

ENSEMBLE_HIDDEN = 16


def priming_spec(num_classes: int, in_channels: int = 3) -> NetSpec:
    return NetSpec(
        in_channels=in_channels,
        layers=(
            conv(in_channels, 16), relu(),
            conv(16, 16), relu(),
            downsample2(),
            conv(16, 32), relu(),
            conv(32, 32, dilation=2), relu(),
            conv(32, 32, dilation=2), relu(),
            conv(32, 32), relu(),
            conv(32, 16), relu(),
            conv(16, num_classes),
            bilinear_up(2),
        ),
    )


def approx_spec(num_classes: int, in_channels: int = 3) -> NetSpec:
    return NetSpec(
        in_channels=in_channels,
        layers=(
            conv(in_channels, 8), relu(),
            conv(8, 16), relu(),
            conv(16, 16), relu(),
            conv(16, num_classes),
        ),
    )


def ensemble_spec(num_classes: int) -> NetSpec:
    """Input channels: [previous scores (C), upsampled current scores (C)]."""
    return NetSpec(
        in_channels=2 * num_classes,
        layers=(
            conv(2 * num_classes, ENSEMBLE_HIDDEN), relu(),
            conv(ENSEMBLE_HIDDEN, num_classes, kernel=1),
        ),
    )


def passthrough_ensemble_params(
    num_classes: int, noise: float = 0.0, seed: int = 0
) -> NetParams:
    """Ensemble weights that reproduce the upsampled current scores exactly.

    Channel i maps through a +/- relu pair (relu(x) - relu(-x) == x), so the
    fused output equals the second input block identically. With noise > 0 a
    small seeded perturbation is added to every weight, which breaks symmetry
    for training while staying close to the pass-through map.
    """
    c = num_classes
    if 2 * c > ENSEMBLE_HIDDEN:
        raise ValueError(
            f"pass-through needs 2*{c} <= {ENSEMBLE_HIDDEN} hidden channels"
        )
    spec = ensemble_spec(c)
    w1 = np.zeros((3, 3, 2 * c, ENSEMBLE_HIDDEN))
    w2 = np.zeros((1, 1, ENSEMBLE_HIDDEN, c))
    for i in range(c):
        w1[1, 1, c + i, 2 * i] = 1.0
        w1[1, 1, c + i, 2 * i + 1] = -1.0
        w2[0, 0, 2 * i, i] = 1.0
        w2[0, 0, 2 * i + 1, i] = -1.0
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        w1 = w1 + rng.normal(0.0, noise, w1.shape)
        w2 = w2 + rng.normal(0.0, noise, w2.shape)
    tensors = []
    it = iter([(w1, np.zeros(ENSEMBLE_HIDDEN)), (w2, np.zeros(c))])
    for layer in spec.layers:
        tensors.append(next(it) if layer.kind == "conv" else None)
    return NetParams(tuple(tensors))


def random_ensemble_params(num_classes: int, seed: int) -> NetParams:
    return init_params(ensemble_spec(num_classes), seed)
