"""From-scratch fully convolutional networks with exact backprop."""

from .layers import (
    LayerSpec,
    bilinear_up,
    concat_input,
    conv,
    downsample2,
    relu,
)
from .net import (
    NetParams,
    NetSpec,
    Network,
    backward_batch,
    check_params,
    forward,
    forward_batch,
    init_params,
)
from .loss import masked_cross_entropy, masked_cross_entropy_batch
from .optim import SgdOptimizer, TrainConfig, sgd_step, zero_velocity
from .checkpoint import load_checkpoint, save_checkpoint, spec_hash
from .presets import (
    approx_spec,
    ensemble_spec,
    passthrough_ensemble_params,
    priming_spec,
    random_ensemble_params,
)

__all__ = [
    "LayerSpec", "NetSpec", "NetParams", "Network", "TrainConfig", "SgdOptimizer",
    "conv", "relu", "downsample2", "bilinear_up", "concat_input",
    "forward", "forward_batch", "backward_batch", "init_params", "check_params",
    "masked_cross_entropy", "masked_cross_entropy_batch",
    "sgd_step", "zero_velocity",
    "save_checkpoint", "load_checkpoint", "spec_hash",
    "priming_spec", "approx_spec", "ensemble_spec",
    "passthrough_ensemble_params", "random_ensemble_params",
]
