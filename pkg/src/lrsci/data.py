"""Synthetic low-rank scenes, masks and random crops."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .lowrank import compose, renormalize


@dataclass(frozen=True)
class SynthSpec:
    H: int = 32
    W: int = 32
    B: int = 8
    rank: int = 3
    smoothness: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if min(self.H, self.W, self.B) < 1:
            raise ValueError("H, W, B must be positive")
        if not 1 <= self.rank <= self.B:
            raise ValueError(f"rank must satisfy 1 <= rank <= B={self.B}, got {self.rank}")
        if self.smoothness < 0:
            raise ValueError("smoothness must be nonnegative")


def synth_hsi(spec: SynthSpec):
    """Draw an exactly rank-``spec.rank`` nonnegative cube scaled to peak 1.

    Spectral signatures are positive random curves and spatial abundances are
    low-passed Gaussian fields clipped at zero, so the composed cube is already
    nonnegative. Returns ``(cube, E, A)`` where ``E`` is the orthonormal basis
    of the signatures and ``compose(A, E)`` equals ``cube``.
    """
    rng = np.random.default_rng(spec.seed)
    signatures = 0.2 + np.abs(rng.standard_normal((spec.B, spec.rank)))
    fields = rng.standard_normal((spec.H, spec.W, spec.rank))
    if spec.smoothness > 0:
        for j in range(spec.rank):
            fields[:, :, j] = gaussian_filter(fields[:, :, j], spec.smoothness, mode="reflect")
            fields[:, :, j] /= fields[:, :, j].std() or 1.0
    abundances = np.clip(fields, 0.0, None)
    E, A = renormalize(signatures, abundances)
    cube = compose(A, E)
    peak = cube.max()
    if peak > 0:
        cube = cube / peak
        A = A / peak
    cube = np.clip(cube, 0.0, 1.0)
    return cube, E, A


def random_mask(H: int, W: int, seed: int = 0, density: float = 0.5) -> np.ndarray:
    """Binary coded aperture with each pixel open with probability ``density``."""
    rng = np.random.default_rng(seed)
    return (rng.random((H, W)) < density).astype(np.float64)


def crop_sampler(cube: np.ndarray, size: int, count: int, seed: int = 0) -> list:
    """``count`` square crops with uniformly random top-left corners."""
    H, W = cube.shape[:2]
    if size < 1 or size > min(H, W):
        raise ValueError(f"crop size {size} must be in [1, {min(H, W)}]")
    rng = np.random.default_rng(seed)
    tops = rng.integers(0, H - size + 1, size=count)
    lefts = rng.integers(0, W - size + 1, size=count)
    return [cube[t : t + size, l : l + size].copy() for t, l in zip(tops, lefts)]
