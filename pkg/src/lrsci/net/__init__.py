"""Trainable low-rank unfolding network (requires torch)."""

from .blocks import SCAB, ProxyNetA, ProxyNetE, qr_positive
from .complexity import Complexity, count_params_flops
from .lrdun import (
    LRDUN,
    NetConfig,
    data_fidelity_feature_A,
    data_fidelity_feature_E,
    gfum_split,
    lrdun_forward,
)
from .train import TrainConfig, TrainLog, load_model, mean_psnr, multi_stage_loss, reconstruct, save_model, train

__all__ = [
    "SCAB",
    "ProxyNetA",
    "ProxyNetE",
    "qr_positive",
    "Complexity",
    "count_params_flops",
    "LRDUN",
    "NetConfig",
    "data_fidelity_feature_A",
    "data_fidelity_feature_E",
    "gfum_split",
    "lrdun_forward",
    "TrainConfig",
    "TrainLog",
    "load_model",
    "mean_psnr",
    "multi_stage_loss",
    "reconstruct",
    "save_model",
    "train",
]
