"""Analytic parameter, MAC and FLOP accounting for :class:`LRDUN`.

MACs are the multiply-accumulates of every convolution and factor product
(``compose``, the gradient contractions, and ``B*k^2`` for QR). FLOPs are two
per MAC plus the elementwise work of the data-fidelity steps: one per mask
multiply, shifted accumulation, residual subtraction and adjoint multiply, and
two per entry of the update ``x - rho * g``. Normalization, activations,
gating products and residual additions are not counted, nor is the classical
back-projection/SVD initialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lrdun import NetConfig


@dataclass
class Complexity:
    params: int
    macs: int
    flops: int
    breakdown: dict = field(default_factory=dict)


def conv_cost(cin, cout, ksize, groups=1, bias=True):
    """``(params, macs_per_output_position)`` of a convolution; ``ksize`` is the kernel volume."""
    weights = cout * (cin // groups) * ksize
    return weights + (cout if bias else 0), weights


def scab_cost(c, kernel, H, W):
    p = 2 * c  # GroupNorm affine
    macs = 0
    for cin, cout, ks, g in ((c, c, 1, 1), (c, c, 1, 1), (c, c, kernel * kernel, c), (c, c, 1, 1), (c, 2 * c, 1, 1), (2 * c, c, 1, 1)):
        cp, cm = conv_cost(cin, cout, ks, g)
        p += cp
        macs += cm * H * W
    return p, macs


def proxynet_a_cost(C, depth, kernel, H, W):
    p = macs = 0
    for i in range(depth - 1):
        w = C * 2**i
        h, wd = H // 2**i, W // 2**i
        sp, sm = scab_cost(w, kernel, h, wd)
        p, macs = p + 2 * sp, macs + 2 * sm  # encoder + decoder SCAB
        dp, dm = conv_cost(w, 2 * w, 4)
        p, macs = p + dp, macs + dm * (h // 2) * (wd // 2)
        up_w = 2 * w * w * 4
        p, macs = p + up_w + w, macs + up_w * (h // 2) * (wd // 2)
        fp, fm = conv_cost(2 * w, w, 1)
        p, macs = p + fp, macs + fm * h * wd
    bp, bm = scab_cost(C * 2 ** (depth - 1), kernel, H // 2 ** (depth - 1), W // 2 ** (depth - 1))
    op, om = conv_cost(C, C, 9)
    return p + bp + op, macs + bm + om * H * W


def proxynet_e_cost(C, B, blocks=2):
    p = macs = 0
    for _ in range(blocks):
        for cin, cout in ((C, 2 * C), (2 * C, C)):
            cp, cm = conv_cost(cin, cout, 3)
            p, macs = p + cp, macs + cm * B
    return p, macs


def data_fidelity_cost(H, W, B, k, out_width, which):
    """``(macs, elementwise_flops)`` of one gradient step on E or A."""
    macs = 2 * H * W * B * k  # compose + contraction
    elementwise = 3 * H * W * B + H * out_width  # mask+accumulate, adjoint multiply, residual
    elementwise += 2 * (B * k if which == "E" else H * W * k)
    return macs, elementwise


def count_params_flops(cfg: NetConfig, H: int, W: int, bands: int = 28, step: int = 2) -> Complexity:
    """Parameters, MACs and FLOPs of one forward pass on an ``H x W x bands`` scene."""
    C, k, B = cfg.C, cfg.k, bands
    out_width = W + step * (B - 1)
    ie_p, ie_m = conv_cost(k, C, 1)
    ia_p, ia_m = conv_cost(k + 1, C, 9)
    init_p, init_m = ie_p + ia_p, ie_m * B + ia_m * H * W

    pe_p, pe_m = proxynet_e_cost(C, B)
    pa_p, pa_m = proxynet_a_cost(C, cfg.unet_depth, cfg.scab_kernel, H, W)
    de_m, de_f = data_fidelity_cost(H, W, B, k, out_width, "E")
    da_m, da_f = data_fidelity_cost(H, W, B, k, out_width, "A")
    qr_m = B * k * k
    stage_m = pe_m + pa_m + de_m + da_m + qr_m + H * W * B * k  # last term: stage output compose
    stage_f = 2 * stage_m + de_f + da_f

    n_param_sets = 1 if cfg.share_weights else cfg.N
    steps_p = 2 * cfg.N
    params = init_p + n_param_sets * (pe_p + pa_p) + steps_p
    macs = init_m + cfg.N * stage_m
    flops = 2 * init_m + cfg.N * stage_f
    breakdown = {
        "init_params": init_p,
        "proxynet_e_params": pe_p,
        "proxynet_a_params": pa_p,
        "step_params": steps_p,
        "init_macs": init_m,
        "stage_macs": stage_m,
        "stage_flops": stage_f,
    }
    return Complexity(params, macs, flops, breakdown)
