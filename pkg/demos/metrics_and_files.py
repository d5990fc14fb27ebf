"""
Scoring reconstructions and storing tensors
===========================================
"""

import tempfile
from pathlib import Path

import numpy as np

from lrsci import io, metrics

rng = np.random.default_rng(0)
ref = rng.random((64, 64, 8))
noisy = ref + rng.normal(0, 0.1, ref.shape)

# noise of std 0.1 on a unit peak is 20 dB
print(f"PSNR {metrics.psnr(noisy, ref):.3f} dB, SSIM {metrics.ssim(noisy, ref):.3f}")
print("per band:", np.round(metrics.per_band_psnr(noisy, ref), 2))

# identical cubes: PSNR is infinite, reports use a 100 dB cap
print(metrics.psnr(ref, ref), metrics.capped_psnr(ref, ref))

# LRSCI1: magic, JSON header, raw little-endian payload
with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "ref.lrsci"
    io.save_tensor(path, ref, "hsi", noise_sigma=0.1)
    back, header = io.load_tensor(path)
    print(header, back.tobytes() == ref.tobytes())
