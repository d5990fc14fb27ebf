"""Single-disperser CASSI sensing: mask, shift, integrate, and the adjoint.

Cubes are ``(..., H, W, B)`` arrays and measurements ``(..., H, W + d_B)``.
``forward``/``adjoint`` accept numpy arrays or torch tensors; the torch path is
what the unfolding network differentiates through.

Vectorization is fixed globally: a cube is flattened band by band, each band
row-major (``x[b*H*W + h*W + w]``), and a measurement is flattened row-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceLimitError

ORACLE_MAX_UNKNOWNS = 10_000


def make_shift_schedule(bands: int, step: int) -> list[int]:
    """Per-band horizontal offsets ``[0, step, 2*step, ...]``."""
    if int(bands) != bands or bands < 1:
        raise ValueError(f"band count must be a positive integer, got {bands}")
    if int(step) != step or step < 0:
        raise ValueError(f"dispersion step must be a nonnegative integer, got {step}")
    return [int(step) * b for b in range(int(bands))]


@dataclass(frozen=True)
class SensingSpec:
    """Coded aperture plus a linear dispersion schedule."""

    mask: np.ndarray
    bands: int
    step: int = 2
    offsets: tuple = field(init=False, repr=False)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=np.float64)
        if mask.ndim != 2 or min(mask.shape) < 1:
            raise ValueError(f"mask must be a nonempty 2D array, got shape {mask.shape}")
        if not np.all(np.isfinite(mask)) or mask.min() < 0.0 or mask.max() > 1.0:
            raise ValueError("mask transmittance must lie in [0, 1]")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "offsets", tuple(make_shift_schedule(self.bands, self.step)))

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def out_width(self) -> int:
        return self.width + self.offsets[-1]

    @property
    def cube_shape(self) -> tuple:
        return (self.height, self.width, self.bands)

    @property
    def meas_shape(self) -> tuple:
        return (self.height, self.out_width)


@dataclass
class Measurement:
    """A detector frame with the noise level it was simulated at."""

    data: np.ndarray
    noise_sigma: float = 0.0
    step: int | None = None


def _is_numpy(a) -> bool:
    return isinstance(a, np.ndarray)


def zeros_like_backend(like, shape):
    if _is_numpy(like):
        return np.zeros(shape, dtype=like.dtype)
    return like.new_zeros(shape)


def mask_like(spec: SensingSpec, like):
    """The mask as an array of the same backend and dtype as ``like``."""
    if _is_numpy(like):
        return spec.mask.astype(like.dtype, copy=False)
    import torch

    return torch.from_numpy(spec.mask.copy()).to(dtype=like.dtype, device=like.device)


def _check_cube(x, spec: SensingSpec):
    if x.ndim < 3 or tuple(x.shape[-3:]) != spec.cube_shape:
        raise ValueError(
            f"cube shape {tuple(x.shape)} does not end in {spec.cube_shape} required by the sensing spec"
        )


def _check_meas(y, spec: SensingSpec):
    if y.ndim < 2 or tuple(y.shape[-2:]) != spec.meas_shape:
        raise ValueError(
            f"measurement shape {tuple(y.shape)} does not end in {spec.meas_shape} required by the sensing spec"
        )


def forward(x, spec: SensingSpec):
    """Mask every band, shift band ``b`` right by ``d_b`` and sum onto the detector."""
    _check_cube(x, spec)
    W = spec.width
    m = mask_like(spec, x)
    y = zeros_like_backend(x, (*x.shape[:-3], spec.height, spec.out_width))
    for b, d in enumerate(spec.offsets):
        y[..., :, d : d + W] += m * x[..., b]
    return y


def adjoint(y, spec: SensingSpec):
    """Transpose of :func:`forward`: ``Z_b(h, w) = M(h, w) * Y(h, w + d_b)``."""
    _check_meas(y, spec)
    W = spec.width
    m = mask_like(spec, y)
    bands = [m * y[..., :, d : d + W] for d in spec.offsets]
    if _is_numpy(y):
        return np.stack(bands, axis=-1)
    import torch

    return torch.stack(bands, dim=-1)


def vec_cube(x: np.ndarray) -> np.ndarray:
    """Band-major flattening of an ``(H, W, B)`` cube."""
    return np.ascontiguousarray(np.moveaxis(x, -1, 0)).ravel()


def unvec_cube(v: np.ndarray, shape) -> np.ndarray:
    H, W, B = shape
    return np.moveaxis(np.asarray(v).reshape(B, H, W), 0, -1)


def build_explicit_sensing_matrix(spec: SensingSpec) -> np.ndarray:
    """Dense ``Phi`` of shape ``(H*W', H*W*B)``, assembled index by index.

    Only for tiny problems; this is the reference the matrix-free operators are
    checked against.
    """
    H, W, B = spec.cube_shape
    if H * W * B > ORACLE_MAX_UNKNOWNS:
        raise ResourceLimitError(
            f"explicit sensing matrix refused for H*W*B={H * W * B} > {ORACLE_MAX_UNKNOWNS}"
        )
    Wp = spec.out_width
    phi = np.zeros((H * Wp, H * W * B))
    for b, d in enumerate(spec.offsets):
        for h in range(H):
            for w in range(W):
                phi[h * Wp + w + d, b * H * W + h * W + w] = spec.mask[h, w]
    return phi


def add_noise(y, sigma: float, seed: int = 0) -> np.ndarray:
    """Additive zero-mean Gaussian noise, reproducible per ``seed``."""
    if not sigma >= 0:
        raise ValueError(f"noise sigma must be nonnegative, got {sigma}")
    y = np.asarray(y.data if isinstance(y, Measurement) else y, dtype=np.float64)
    if sigma == 0:
        return y.copy()
    rng = np.random.default_rng(seed)
    return y + rng.normal(0.0, sigma, size=y.shape)


def simulate(x: np.ndarray, spec: SensingSpec, sigma: float = 0.0, seed: int = 0) -> Measurement:
    """Noisy measurement of cube ``x`` packaged with its noise level."""
    y = add_noise(forward(np.asarray(x, dtype=np.float64), spec), sigma, seed)
    return Measurement(y, noise_sigma=float(sigma), step=spec.step)
