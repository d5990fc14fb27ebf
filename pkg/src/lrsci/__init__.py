"""Low-rank reconstruction for coded aperture snapshot spectral imaging.

The numpy core (sensing operators, low-rank factor algebra, the classical
alternating solver, metrics and the LRSCI1 container) is importable without
torch. The trainable unfolding network lives in :mod:`lrsci.net`.
"""

from .cassi import (
    Measurement,
    SensingSpec,
    adjoint,
    build_explicit_sensing_matrix,
    forward,
    make_shift_schedule,
    simulate,
)
from .data import SynthSpec, crop_sampler, random_mask, synth_hsi
from .errors import DegenerateInputError, DivergenceError, ResourceLimitError
from .io import load_tensor, load_weights, save_tensor, save_weights
from .lowrank import compose, decompose_truncated_svd, forward_lowrank, grad_basis, grad_subspace, renormalize
from .metrics import capped_psnr, per_band_psnr, psnr, ssim
from .prox import prox_apply
from .solver import SolverConfig, SolveTrace, init_classical, solve_alternating

__version__ = "0.1.0"

__all__ = [
    "Measurement",
    "SensingSpec",
    "adjoint",
    "build_explicit_sensing_matrix",
    "forward",
    "make_shift_schedule",
    "simulate",
    "SynthSpec",
    "crop_sampler",
    "random_mask",
    "synth_hsi",
    "DegenerateInputError",
    "DivergenceError",
    "ResourceLimitError",
    "load_tensor",
    "load_weights",
    "save_tensor",
    "save_weights",
    "compose",
    "decompose_truncated_svd",
    "forward_lowrank",
    "grad_basis",
    "grad_subspace",
    "renormalize",
    "capped_psnr",
    "per_band_psnr",
    "psnr",
    "ssim",
    "prox_apply",
    "SolverConfig",
    "SolveTrace",
    "init_classical",
    "solve_alternating",
]
