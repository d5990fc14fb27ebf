"""Reconstruction quality metrics for hyperspectral cubes."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import gaussian_filter

PSNR_CAP_DB = 100.0


def psnr(x, ref, peak: float = 1.0) -> float:
    """Cube-wide PSNR in dB; ``inf`` for identical inputs."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {ref.shape}")
    mse = np.mean((x - ref) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(peak**2 / mse))


def capped_psnr(x, ref, peak: float = 1.0) -> float:
    return min(psnr(x, ref, peak), PSNR_CAP_DB)


def _ssim_band(x, y, c1, c2, sigma=1.5, truncate=3.5):
    # truncate=3.5 at sigma=1.5 gives an 11x11 window
    blur = lambda a: gaussian_filter(a, sigma, truncate=truncate, mode="reflect")
    mu_x, mu_y = blur(x), blur(y)
    sxx = blur(x * x) - mu_x * mu_x
    syy = blur(y * y) - mu_y * mu_y
    sxy = blur(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    smap = num / den
    pad = 5
    if smap.shape[0] > 2 * pad and smap.shape[1] > 2 * pad:
        smap = smap[pad:-pad, pad:-pad]
    return smap.mean()


def ssim(x, ref, peak: float = 1.0) -> float:
    """Mean SSIM over bands of ``(H, W, B)`` cubes (Gaussian 11x11 window, sigma 1.5)."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {ref.shape}")
    if x.ndim == 2:
        x, ref = x[..., None], ref[..., None]
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    return float(np.mean([_ssim_band(x[..., b], ref[..., b], c1, c2) for b in range(x.shape[-1])]))


def per_band_psnr(x, ref, peak: float = 1.0) -> np.ndarray:
    return np.array([capped_psnr(x[..., b], ref[..., b], peak) for b in range(x.shape[-1])])
