"""Stochastic gradient descent with classical momentum."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .net import NetParams, ParamPair

Velocity = Tuple[Optional[ParamPair], ...]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 2
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


def zero_velocity(params: NetParams) -> Velocity:
    return tuple(
        None if pair is None else (np.zeros_like(pair[0]), np.zeros_like(pair[1]))
        for pair in params.tensors
    )


def sgd_step(
    params: NetParams,
    grads: Tuple[Optional[ParamPair], ...],
    config: TrainConfig,
    velocity: Optional[Velocity] = None,
) -> Tuple[NetParams, Velocity]:
    """v <- momentum*v + g;  p <- p - lr*v. Returns updated params and velocity."""
    if len(grads) != len(params.tensors):
        raise ValueError("gradient structure does not match parameters")
    if velocity is None:
        velocity = zero_velocity(params)
    new_tensors: List[Optional[ParamPair]] = []
    new_vel: List[Optional[ParamPair]] = []
    for pair, g, v in zip(params.tensors, grads, velocity):
        if pair is None:
            if g is not None:
                raise ValueError("gradient present for a parameterless layer")
            new_tensors.append(None)
            new_vel.append(None)
            continue
        if g is None:
            raise ValueError("missing gradient for a conv layer")
        w, b = pair
        gw, gb = g
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ValueError(f"gradient shapes {gw.shape}/{gb.shape} do not match params")
        vw, vb = v if v is not None else (np.zeros_like(w), np.zeros_like(b))
        vw = config.momentum * vw + gw
        vb = config.momentum * vb + gb
        new_tensors.append((w - config.learning_rate * vw, b - config.learning_rate * vb))
        new_vel.append((vw, vb))
    return NetParams(tuple(new_tensors)), tuple(new_vel)


class SgdOptimizer:
    """Stateful wrapper carrying the momentum buffers across steps."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self._velocity: Optional[Velocity] = None

    def step(self, params: NetParams, grads: Tuple[Optional[ParamPair], ...]) -> NetParams:
        params, self._velocity = sgd_step(params, grads, self.config, self._velocity)
        return params
