"""
Simulating a CASSI snapshot
===========================

A low-rank cube is masked, sheared band by band and summed onto a 2D detector.
"""

import numpy as np

from lrsci import SensingSpec, adjoint, forward, simulate
from lrsci.data import SynthSpec, random_mask, synth_hsi

# a 32x32 scene with 8 bands living in a 3-dimensional spectral subspace
cube, E, A = synth_hsi(SynthSpec(H=32, W=32, B=8, rank=3, smoothness=2.0, seed=0))
print("cube", cube.shape, "basis", E.shape, "subspace images", A.shape)

# the coded aperture is a random binary pattern; band b lands 2*b pixels to the right
spec = SensingSpec(random_mask(32, 32, seed=1), bands=8, step=2)
y = forward(cube, spec)
print("measurement", y.shape)  # width grows by step * (bands - 1)

# noisy capture, reproducible under its seed
meas = simulate(cube, spec, sigma=0.01, seed=3)
print("noise std", np.std(meas.data - y))

# the adjoint spreads the detector back over the cube; the dot test certifies it
rng = np.random.default_rng(0)
x, r = rng.standard_normal(spec.cube_shape), rng.standard_normal(spec.meas_shape)
print("dot test gap", abs(np.vdot(forward(x, spec), r) - np.vdot(x, adjoint(r, spec))))
