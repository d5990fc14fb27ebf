"""Proximal operators for the classical alternating solver."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .lowrank import renormalize

_threads = 1


def set_threads(n: int) -> None:
    """Worker count for the per-channel TV prox (the only threaded region here)."""
    global _threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = int(n)


def soft_threshold(value, strength):
    return np.sign(value) * np.maximum(np.abs(value) - strength, 0.0)


def _grad(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def _div(px, py):
    # negative adjoint of _grad
    d = np.zeros_like(px)
    d[:, :-1] += px[:, :-1]
    d[:, 1:] -= px[:, :-1]
    d[:-1, :] += py[:-1, :]
    d[1:, :] -= py[:-1, :]
    return d


def total_variation(u) -> float:
    """Isotropic discrete TV of a 2D image, or summed over channels of a stack."""
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 3:
        return sum(total_variation(u[:, :, j]) for j in range(u.shape[2]))
    gx, gy = _grad(u)
    return float(np.sqrt(gx**2 + gy**2).sum())


def tv_prox_2d(f, strength, iters=30, tau=0.125):
    """``argmin_u 0.5*||u - f||^2 + strength*TV(u)`` by Chambolle's dual projection."""
    if strength <= 0:
        return f.copy()
    px = np.zeros_like(f)
    py = np.zeros_like(f)
    for _ in range(iters):
        gx, gy = _grad(_div(px, py) - f / strength)
        norm = 1.0 + tau * np.sqrt(gx**2 + gy**2)
        px = (px + tau * gx) / norm
        py = (py + tau * gy) / norm
    return f - strength * _div(px, py)


def tv2d(value, strength, iters=30):
    """Channelwise TV prox of an ``(H, W, k)`` stack (or a single image)."""
    if value.ndim == 2:
        return tv_prox_2d(value, strength, iters)
    run = lambda j: tv_prox_2d(value[:, :, j], strength, iters)
    channels = range(value.shape[-1])
    if _threads > 1 and value.shape[-1] > 1:
        with ThreadPoolExecutor(_threads) as pool:
            return np.stack(list(pool.map(run, channels)), axis=-1)
    return np.stack([run(j) for j in channels], axis=-1)


PROX_NAMES = ("identity", "soft_threshold", "tv2d", "qr_orthonormalize")
ALIASES = {"id": "identity", "l1": "soft_threshold", "tv": "tv2d", "qr": "qr_orthonormalize"}


def resolve(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in PROX_NAMES:
        raise ValueError(f"unknown proximal operator {name!r}; choose from {PROX_NAMES}")
    return name


def prox_apply(name, strength, value, partner=None, tv_iters=30):
    """Apply a registered proximal map.

    ``qr_orthonormalize`` takes the basis as ``value``. Given the subspace
    images as ``partner`` it returns ``(E, A)`` with ``A E^T`` preserved;
    otherwise it returns only the orthonormalized basis.
    """
    name = resolve(name)
    if name == "identity":
        return value
    if name == "soft_threshold":
        return soft_threshold(value, strength)
    if name == "tv2d":
        return tv2d(value, strength, tv_iters)
    if partner is None:
        Q, _ = renormalize(value, np.zeros((1, value.shape[1])))
        return Q
    return renormalize(value, partner)
