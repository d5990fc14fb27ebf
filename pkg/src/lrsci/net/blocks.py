"""Learnable proximal modules: the 1D basis refiner and the SCAB U-Net."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import DivergenceError


def qr_positive(E: torch.Tensor) -> torch.Tensor:
    """Orthonormal factor of ``E`` (``..., B, k``) with ``diag(R) > 0``."""
    Q, R = torch.linalg.qr(E)
    signs = torch.sign(torch.diagonal(R, dim1=-2, dim2=-1))
    signs = torch.where(signs == 0, torch.ones_like(signs), signs)
    return Q * signs.unsqueeze(-2)


def _check_finite(t: torch.Tensor, where: str):
    if not torch.isfinite(t).all():
        raise DivergenceError(f"non-finite activations in {where}")


class ResBlock1d(nn.Module):
    """``x + conv(GELU(conv(x)))`` along the band axis, widening C -> 2C -> C."""

    def __init__(self, channels: int, kernel_size: int = 3):
        super().__init__()
        pad = kernel_size // 2
        self.conv1 = nn.Conv1d(channels, 2 * channels, kernel_size, padding=pad)
        self.conv2 = nn.Conv1d(2 * channels, channels, kernel_size, padding=pad)
        nn.init.zeros_(self.conv2.weight)
        nn.init.zeros_(self.conv2.bias)

    def forward(self, x):
        return x + self.conv2(F.gelu(self.conv1(x)))


class ProxyNetE(nn.Module):
    """Refines ``E_feat`` of shape ``(N, B, C)``; orthonormalizes its first ``k`` columns."""

    def __init__(self, channels: int, rank: int, blocks: int = 2):
        super().__init__()
        self.rank = rank
        self.body = nn.Sequential(*[ResBlock1d(channels) for _ in range(blocks)])

    def forward(self, E_feat):
        out = self.body(E_feat.transpose(-1, -2)).transpose(-1, -2)
        _check_finite(out, "ProxyNetE")
        physical = qr_positive(out[..., : self.rank])
        return torch.cat([physical, out[..., self.rank :]], dim=-1)


class SCAB(nn.Module):
    """Spatial conv-attention block on channels-first ``(N, C, H, W)`` maps.

    A large depthwise kernel produces an attention map that gates a pointwise
    value branch; a pointwise feed-forward block follows. Both branches are
    residual and their output projections start at zero.
    """

    def __init__(self, channels: int, kernel_size: int = 11):
        super().__init__()
        if kernel_size % 2 == 0:
            raise ValueError("SCAB kernel size must be odd")
        self.norm = nn.GroupNorm(channels, channels)
        self.value = nn.Conv2d(channels, channels, 1)
        self.attn_in = nn.Conv2d(channels, channels, 1)
        self.attn_dw = nn.Conv2d(channels, channels, kernel_size, padding=kernel_size // 2, groups=channels)
        self.proj = nn.Conv2d(channels, channels, 1)
        self.ffn_in = nn.Conv2d(channels, 2 * channels, 1)
        self.ffn_out = nn.Conv2d(2 * channels, channels, 1)
        for layer in (self.proj, self.ffn_out):
            nn.init.zeros_(layer.weight)
            nn.init.zeros_(layer.bias)

    def forward(self, x):
        n = self.norm(x.contiguous())
        x = x + self.proj(self.value(n) * self.attn_dw(self.attn_in(n)))
        x = x + self.ffn_out(F.gelu(self.ffn_in(x)))
        _check_finite(x, "SCAB")
        return x


class ProxyNetA(nn.Module):
    """U-Net of SCABs over channels-last ``(N, H, W, C)`` features with a global residual."""

    def __init__(self, channels: int, depth: int = 2, kernel_size: int = 11):
        super().__init__()
        if depth < 1:
            raise ValueError("U-Net depth must be >= 1")
        self.depth = depth
        widths = [channels * 2**i for i in range(depth)]
        self.enc = nn.ModuleList(SCAB(w, kernel_size) for w in widths[:-1])
        self.down = nn.ModuleList(nn.Conv2d(w, 2 * w, 2, stride=2) for w in widths[:-1])
        self.bottleneck = SCAB(widths[-1], kernel_size)
        self.up = nn.ModuleList(nn.ConvTranspose2d(2 * w, w, 2, stride=2) for w in widths[:-1])
        self.fuse = nn.ModuleList(nn.Conv2d(2 * w, w, 1) for w in widths[:-1])
        self.dec = nn.ModuleList(SCAB(w, kernel_size) for w in widths[:-1])
        self.out = nn.Conv2d(channels, channels, 3, padding=1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    @property
    def multiple(self) -> int:
        return 2 ** (self.depth - 1)

    def forward(self, A_feat):
        H, W = A_feat.shape[-3:-1]
        if H % self.multiple or W % self.multiple:
            raise ValueError(f"spatial size {H}x{W} must be divisible by {self.multiple}")
        # GroupNorm backward on a strided channels-last view crashes some torch builds
        x = A_feat.permute(0, 3, 1, 2).contiguous()
        h = x
        skips = []
        for enc, down in zip(self.enc, self.down):
            h = enc(h)
            skips.append(h)
            h = down(h)
        h = self.bottleneck(h)
        for i in reversed(range(self.depth - 1)):
            h = self.up[i](h)
            h = self.fuse[i](torch.cat([h, skips[i]], dim=1))
            h = self.dec[i](h)
        out = x + self.out(h)
        _check_finite(out, "ProxyNetA")
        return out.permute(0, 2, 3, 1)
