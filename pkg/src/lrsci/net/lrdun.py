"""Low-rank deep unfolding network.

Each stage runs the E-problem (data-fidelity step on the physical channels of
the basis features, then ``ProxyNetE``) followed by the A-problem (same for the
subspace-image features with ``ProxyNetA``). Channels ``k:`` of both feature
tensors bypass the data-fidelity steps untouched.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .. import cassi
from ..lowrank import compose
from ..solver import STEP_SAFETY, gd_step_A, gd_step_E, init_classical, lipschitz_basis, lipschitz_subspace
from .blocks import ProxyNetA, ProxyNetE, qr_positive

log = logging.getLogger(__name__)


@dataclass
class NetConfig:
    N: int = 3
    k: int = 11
    C: int = 16
    share_weights: bool = False
    unet_depth: int = 2
    scab_kernel: int = 11
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("stage count N must be >= 1")
        if not 1 <= self.k <= self.C:
            raise ValueError(f"need 1 <= k <= C, got k={self.k}, C={self.C}")
        if self.scab_kernel % 2 == 0 or self.scab_kernel < 1:
            raise ValueError("scab_kernel must be a positive odd integer")
        if self.unet_depth < 1:
            raise ValueError("unet_depth must be >= 1")


def _cat(parts, axis=-1):
    if isinstance(parts[0], np.ndarray):
        return np.concatenate(parts, axis=axis)
    return torch.cat(parts, dim=axis)


def gfum_split(feat, k: int):
    """``(feat[..., :k], feat[..., k:])``: physical and auxiliary channels."""
    C = feat.shape[-1]
    if not 1 <= k <= C:
        raise ValueError(f"physical rank k={k} must lie in [1, C={C}]")
    return feat[..., :k], feat[..., k:]


def data_fidelity_feature_E(E_feat, y, spec, A_physical, rho_e):
    """Gradient step on the basis channels ``:k``; auxiliary channels pass through."""
    k = A_physical.shape[-1]
    E, E_aux = gfum_split(E_feat, k)
    return _cat([gd_step_E(E, A_physical, y, spec, rho_e), E_aux])


def data_fidelity_feature_A(A_feat, y, spec, E_physical, rho_a):
    """Gradient step on the subspace channels ``:k``; auxiliary channels pass through."""
    k = E_physical.shape[-1]
    A, A_aux = gfum_split(A_feat, k)
    return _cat([gd_step_A(A, E_physical, y, spec, rho_a), A_aux])


def _inv_softplus(v: float) -> float:
    return v + math.log(-math.expm1(-v))


class Stage(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.prox_e = ProxyNetE(cfg.C, cfg.k)
        self.prox_a = ProxyNetA(cfg.C, cfg.unet_depth, cfg.scab_kernel)


class LRDUN(nn.Module):
    """``N``-stage unfolded alternating PGD with learned proximal modules.

    Step sizes are per-stage positive scalars (softplus of a raw parameter).
    Call :meth:`calibrate_steps` once on representative data before training.
    """

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed)
            self.init_e = nn.Conv1d(cfg.k, cfg.C, 1)
            self.init_a = nn.Conv2d(cfg.k + 1, cfg.C, 3, padding=1)
            if cfg.share_weights:
                shared = Stage(cfg)
                self.stages = nn.ModuleList([shared] * cfg.N)
            else:
                self.stages = nn.ModuleList(Stage(cfg) for _ in range(cfg.N))
        init = _inv_softplus(0.5)
        self.rho_e_raw = nn.Parameter(torch.full((cfg.N,), init))
        self.rho_a_raw = nn.Parameter(torch.full((cfg.N,), init))
        self.register_buffer("calibrated", torch.tensor(False))

    @property
    def rho_e(self):
        return F.softplus(self.rho_e_raw)

    @property
    def rho_a(self):
        return F.softplus(self.rho_a_raw)

    def initial_factors(self, y, spec: cassi.SensingSpec):
        """Classical back-projection + truncated SVD per sample, as tensors."""
        y_np = y.detach().cpu().double().numpy()
        E0, A0 = [], []
        for sample in y_np:
            E, A, _ = init_classical(sample, spec, self.cfg.k)
            E0.append(E)
            A0.append(A)
        opts = dict(dtype=y.dtype, device=y.device)
        return torch.as_tensor(np.stack(E0), **opts), torch.as_tensor(np.stack(A0), **opts)

    def init_features(self, y, spec):
        E0, A0 = self.initial_factors(y, spec)
        E_feat = self.init_e(E0.transpose(-1, -2)).transpose(-1, -2)
        mask = cassi.mask_like(spec, y).expand(y.shape[0], 1, spec.height, spec.width)
        A_feat = self.init_a(torch.cat([A0.permute(0, 3, 1, 2), mask], dim=1)).permute(0, 2, 3, 1)
        return E_feat, A_feat

    def _prox_a(self, prox_a: ProxyNetA, A_feat):
        m = prox_a.multiple
        H, W = A_feat.shape[1:3]
        ph, pw = (-H) % m, (-W) % m
        if not (ph or pw):
            return prox_a(A_feat)
        log.info("reflect-padding %dx%d features by (%d, %d) for the U-Net", H, W, ph, pw)
        x = F.pad(A_feat.permute(0, 3, 1, 2), (0, pw, 0, ph), mode="reflect").permute(0, 2, 3, 1)
        return prox_a(x)[:, :H, :W]

    def forward(self, y, spec: cassi.SensingSpec):
        """Return ``(stages, cube)``; ``stages`` is a list of ``(E, A, X)`` per stage."""
        if y.ndim == 2:
            y = y.unsqueeze(0)
        k = self.cfg.k
        E_feat, A_feat = self.init_features(y, spec)
        rho_e, rho_a = self.rho_e, self.rho_a
        outputs = []
        for i, stage in enumerate(self.stages):
            A = A_feat[..., :k]
            E_feat = stage.prox_e(data_fidelity_feature_E(E_feat, y, spec, A, rho_e[i]))
            E = E_feat[..., :k]
            A_feat = self._prox_a(stage.prox_a, data_fidelity_feature_A(A_feat, y, spec, E, rho_a[i]))
            A = A_feat[..., :k]
            outputs.append((E, A, compose(A, E)))
        return outputs, outputs[-1][2]

    @torch.no_grad()
    def calibrate_steps(self, y, spec: cassi.SensingSpec, iters: int = 50):
        """Set every stage's steps to ``0.9 / L`` measured on the initial features of ``y``."""
        if y.ndim == 2:
            y = y.unsqueeze(0)
        k = self.cfg.k
        E_feat, A_feat = self.init_features(y, spec)
        A = A_feat[..., :k].double().cpu().numpy()
        E = qr_positive(E_feat[..., :k].double()).cpu().numpy()
        L_e = max(lipschitz_basis(a, spec, iters) for a in A)
        L_a = max(lipschitz_subspace(e, spec, iters) for e in E)
        if L_e > 0:
            self.rho_e_raw.fill_(_inv_softplus(STEP_SAFETY / L_e))
        if L_a > 0:
            self.rho_a_raw.fill_(_inv_softplus(STEP_SAFETY / L_a))
        self.calibrated.fill_(True)
        return L_e, L_a


def lrdun_forward(y, spec, model: LRDUN):
    """Functional alias for ``model(y, spec)``."""
    return model(y, spec)
