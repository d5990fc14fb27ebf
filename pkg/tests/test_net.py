import numpy as np
import pytest

torch = pytest.importorskip("torch")

from lrsci import cassi, solver
from lrsci.data import SynthSpec, random_mask, synth_hsi
from lrsci.net import (
    LRDUN,
    SCAB,
    NetConfig,
    ProxyNetA,
    ProxyNetE,
    count_params_flops,
    data_fidelity_feature_A,
    data_fidelity_feature_E,
    gfum_split,
    multi_stage_loss,
    qr_positive,
)
from lrsci.net.complexity import conv_cost

from conftest import fd_parameter_check, make_spec, perturb_parameters


def n_params(module):
    return sum(p.numel() for p in module.parameters())


def toy_problem(H=16, W=16, B=8, n=2, seed=0):
    cubes = np.stack([synth_hsi(SynthSpec(H, W, B, 3, 2.0, seed + i))[0] for i in range(n)])
    spec = cassi.SensingSpec(random_mask(H, W, seed=7), bands=B, step=2)
    return cubes, spec, cassi.forward(cubes, spec)


# ---------------------------------------------------------------- GFUM


def test_gfum_split_shapes():
    feat = torch.randn(2, 8, 5)
    phys, aux = gfum_split(feat, 3)
    assert phys.shape[-1] == 3 and aux.shape[-1] == 2
    assert torch.equal(torch.cat([phys, aux], dim=-1), feat)


def test_gfum_split_without_auxiliary_channels():
    phys, aux = gfum_split(torch.randn(4, 3), 3)
    assert aux.shape == (4, 0)
    with pytest.raises(ValueError):
        gfum_split(torch.randn(4, 3), 4)


def _feature_state(rng, spec, k, C, batch=2):
    H, W, B = spec.cube_shape
    t = lambda *s: torch.from_numpy(rng.standard_normal(s))
    return t(batch, B, C), t(batch, H, W, C), t(batch, *spec.meas_shape)


def test_feature_steps_pass_auxiliary_channels_through(rng):
    spec = make_spec(rng, 8, 6, 5, 1)
    for _ in range(50):
        E_feat, A_feat, y = _feature_state(rng, spec, 2, 5)
        rho = float(rng.random())
        E_half = data_fidelity_feature_E(E_feat, y, spec, A_feat[..., :2], rho)
        A_half = data_fidelity_feature_A(A_feat, y, spec, E_feat[..., :2], rho)
        assert torch.equal(E_half[..., 2:], E_feat[..., 2:])
        assert torch.equal(A_half[..., 2:], A_feat[..., 2:])


def test_feature_steps_zero_step_is_identity(rng):
    spec = make_spec(rng, 8, 6, 5, 1)
    E_feat, A_feat, y = _feature_state(rng, spec, 2, 5)
    assert torch.equal(data_fidelity_feature_E(E_feat, y, spec, A_feat[..., :2], 0.0), E_feat)
    assert torch.equal(data_fidelity_feature_A(A_feat, y, spec, E_feat[..., :2], 0.0), A_feat)


def test_feature_steps_match_classical_steps(rng):
    spec = make_spec(rng, 8, 6, 5, 1)
    E_feat, A_feat, y = _feature_state(rng, spec, 2, 5, batch=1)
    E_half = data_fidelity_feature_E(E_feat, y, spec, A_feat[..., :2], 0.3)
    A_half = data_fidelity_feature_A(A_feat, y, spec, E_feat[..., :2], 0.2)
    assert torch.equal(E_half[..., :2], solver.gd_step_E(E_feat[..., :2], A_feat[..., :2], y, spec, 0.3))
    assert torch.equal(A_half[..., :2], solver.gd_step_A(A_feat[..., :2], E_feat[..., :2], y, spec, 0.2))
    # and against the numpy path
    E_np = solver.gd_step_E(E_feat[0, :, :2].numpy(), A_feat[0, ..., :2].numpy(), y[0].numpy(), spec, 0.3)
    np.testing.assert_allclose(E_half[0, :, :2].numpy(), E_np, rtol=1e-12, atol=1e-12)


def test_without_gfum_pipeline_matches_classical(rng):
    spec = make_spec(rng, 8, 6, 5, 1)
    E_feat, A_feat, y = _feature_state(rng, spec, 3, 3)
    E_half = data_fidelity_feature_E(E_feat, y, spec, A_feat, 0.1)
    assert torch.equal(E_half, solver.gd_step_E(E_feat, A_feat, y, spec, 0.1))


# ---------------------------------------------------------------- ProxyNetE


def test_qr_positive(rng):
    E = torch.from_numpy(rng.standard_normal((3, 7, 4)))
    Q = qr_positive(E)
    eye = torch.eye(4, dtype=E.dtype)
    assert torch.allclose(Q.mT @ Q, eye.expand(3, 4, 4), atol=1e-12)
    R = Q.mT @ E
    assert (torch.diagonal(R, dim1=-2, dim2=-1) > 0).all()


def test_proxynet_e_identity_at_init(rng):
    net = ProxyNetE(6, 3).double()
    E_feat = torch.from_numpy(rng.standard_normal((2, 8, 6)))
    out = net(E_feat)
    assert out.shape == E_feat.shape
    assert torch.allclose(out[..., :3], qr_positive(E_feat[..., :3]), atol=1e-12)
    assert torch.equal(out[..., 3:], E_feat[..., 3:])


def test_proxynet_e_orthonormal_after_training_like_weights(rng):
    net = ProxyNetE(6, 3).double()
    perturb_parameters(net, 0.3)
    out = net(torch.from_numpy(rng.standard_normal((4, 8, 6))))
    E = out[..., :3]
    assert torch.linalg.matrix_norm(E.mT @ E - torch.eye(3, dtype=E.dtype)).max() <= 1e-5


def test_proxynet_e_gradients(rng):
    net = ProxyNetE(6, 3).double()
    perturb_parameters(net, 0.2, seed=1)
    x = torch.from_numpy(rng.standard_normal((2, 8, 6)))
    head = torch.from_numpy(rng.standard_normal((2, 8, 6)))
    assert fd_parameter_check(net, lambda: (net(x) * head).sum(), seed=2) <= 1e-3


# ---------------------------------------------------------------- SCAB / ProxyNetA


@pytest.mark.parametrize("H, W", [(1, 1), (3, 5), (16, 16)])
def test_scab_shape(H, W):
    block = SCAB(4)
    assert block(torch.randn(2, 4, H, W)).shape == (2, 4, H, W)


def test_scab_even_kernel_rejected():
    with pytest.raises(ValueError):
        SCAB(4, kernel_size=10)


def test_scab_receptive_field_reaches_5_pixels():
    block = SCAB(4).double()
    perturb_parameters(block, 0.3)
    x = torch.randn(1, 4, 21, 21, dtype=torch.float64)
    x2 = x.clone()
    x2[..., 10, 10] += 1.0
    diff = (block(x2) - block(x)).abs().sum(dim=1)[0]
    for r, c in [(10, 15), (10, 5), (15, 10), (5, 10), (15, 15)]:
        assert diff[r, c] > 1e-6 * diff[10, 10]


def test_scab_gradients(rng):
    block = SCAB(4).double()
    perturb_parameters(block, 0.2, seed=3)
    x = torch.from_numpy(rng.standard_normal((1, 4, 12, 12)))
    head = torch.from_numpy(rng.standard_normal((1, 4, 12, 12)))
    assert fd_parameter_check(block, lambda: (block(x) * head).sum(), seed=4) <= 1e-3


def test_proxynet_a_shape_and_identity_at_init():
    net = ProxyNetA(6).double()
    x = torch.randn(2, 32, 32, 6, dtype=torch.float64)
    out = net(x)
    assert out.shape == x.shape
    assert torch.equal(out, x)


def test_proxynet_a_indivisible_size():
    with pytest.raises(ValueError):
        ProxyNetA(4, depth=3)(torch.randn(1, 10, 12, 4))


def test_proxynet_a_gradients(rng):
    net = ProxyNetA(4).double()
    perturb_parameters(net, 0.2, seed=5)
    x = torch.from_numpy(rng.standard_normal((1, 8, 8, 4)))
    head = torch.from_numpy(rng.standard_normal((1, 8, 8, 4)))
    assert fd_parameter_check(net, lambda: (net(x) * head).sum(), seed=6) <= 1e-3


# ---------------------------------------------------------------- LRDUN


def test_config_validation():
    for bad in (dict(N=0), dict(k=0), dict(k=7, C=6), dict(scab_kernel=4), dict(unet_depth=0)):
        with pytest.raises(ValueError):
            NetConfig(**bad)


def test_forward_shapes_and_stage_orthonormality():
    cubes, spec, y = toy_problem()
    model = LRDUN(NetConfig(N=3, k=3, C=6)).double()
    perturb_parameters(model.stages, 0.1)
    stages, X = model(torch.from_numpy(y), spec)
    assert len(stages) == 3 and X.shape == (2, 16, 16, 8)
    for E, A, Xi in stages:
        assert E.shape == (2, 8, 3) and A.shape == (2, 16, 16, 3) and Xi.shape == X.shape
        assert torch.linalg.matrix_norm(E.mT @ E - torch.eye(3, dtype=E.dtype)).max() <= 1e-5


def test_single_measurement_input():
    cubes, spec, y = toy_problem(n=1)
    model = LRDUN(NetConfig(N=1, k=3, C=4)).double()
    _, X = model(torch.from_numpy(y[0]), spec)
    assert X.shape == (1, 16, 16, 8)


def test_stage_locality():
    cubes, spec, y = toy_problem()
    two = LRDUN(NetConfig(N=2, k=3, C=6, seed=1)).double()
    perturb_parameters(two, 0.05)
    one = LRDUN(NetConfig(N=1, k=3, C=6, seed=1)).double()
    with torch.no_grad():
        one.init_e.load_state_dict(two.init_e.state_dict())
        one.init_a.load_state_dict(two.init_a.state_dict())
        one.stages[0].load_state_dict(two.stages[0].state_dict())
        one.rho_e_raw.copy_(two.rho_e_raw[:1])
        one.rho_a_raw.copy_(two.rho_a_raw[:1])
    yt = torch.from_numpy(y)
    s1, _ = one(yt, spec)
    s2, _ = two(yt, spec)
    for a, b in zip(s1[0], s2[0]):
        assert torch.equal(a, b)


def test_without_gfum_network_runs():
    cubes, spec, y = toy_problem()
    model = LRDUN(NetConfig(N=2, k=3, C=3)).double()
    _, X = model(torch.from_numpy(y), spec)
    assert torch.isfinite(X).all()


def test_indivisible_scene_is_reflect_padded(caplog):
    H, W, B = 15, 13, 4
    cube = synth_hsi(SynthSpec(H, W, B, 2, 1.0, 0))[0]
    spec = cassi.SensingSpec(random_mask(H, W, 1), bands=B, step=1)
    model = LRDUN(NetConfig(N=1, k=2, C=4)).double()
    with caplog.at_level("INFO"):
        _, X = model(torch.from_numpy(cassi.forward(cube, spec)), spec)
    assert X.shape == (1, H, W, B)
    assert any("reflect-padding" in r.message for r in caplog.records)


def test_shared_weights_parameter_count():
    counts = {N: n_params(LRDUN(NetConfig(N=N, k=3, C=6, share_weights=True))) for N in (1, 2, 5)}
    # only the per-stage step scalars grow with N
    assert counts[2] - counts[1] == 2 and counts[5] - counts[1] == 8
    for N in (2, 5):
        assert counts[N] < n_params(LRDUN(NetConfig(N=N, k=3, C=6)))


def test_calibration_sets_safe_steps():
    cubes, spec, y = toy_problem()
    model = LRDUN(NetConfig(N=2, k=3, C=6)).double()
    L_e, L_a = model.calibrate_steps(torch.from_numpy(y), spec)
    assert bool(model.calibrated)
    assert torch.allclose(model.rho_e, torch.full((2,), 0.9 / L_e, dtype=torch.float64))
    assert torch.allclose(model.rho_a, torch.full((2,), 0.9 / L_a, dtype=torch.float64))


# ---------------------------------------------------------------- loss


def test_multi_stage_loss_closed_forms():
    x = torch.rand(2, 4, 4, 3)
    assert multi_stage_loss([x, x, x], x) == 0
    assert multi_stage_loss([x + 0.25], x).item() == pytest.approx(0.25)
    noisy = [x + 0.1 * torch.randn_like(x) for _ in range(3)]
    final = torch.sqrt(torch.mean((noisy[-1] - x) ** 2))
    assert multi_stage_loss(noisy, x) >= final
    with pytest.raises(ValueError):
        multi_stage_loss([x[..., :2]], x)


# ---------------------------------------------------------------- complexity


def test_single_conv_parameter_count():
    assert conv_cost(4, 8, 3, bias=False)[0] == 96
    assert n_params(torch.nn.Conv1d(4, 8, 3, bias=False)) == 96


@pytest.mark.parametrize(
    "cfg",
    [
        NetConfig(N=2, k=3, C=6),
        NetConfig(N=3, k=11, C=16),
        NetConfig(N=4, k=5, C=8, share_weights=True),
        NetConfig(N=1, k=2, C=4, unet_depth=3, scab_kernel=5),
    ],
)
def test_param_count_matches_torch(cfg):
    assert count_params_flops(cfg, 32, 32, 8).params == n_params(LRDUN(cfg))


def test_doubling_stages_doubles_stage_parameters():
    a = count_params_flops(NetConfig(N=2, k=3, C=6), 32, 32, 8)
    b = count_params_flops(NetConfig(N=4, k=3, C=6), 32, 32, 8)
    stage = a.breakdown["proxynet_e_params"] + a.breakdown["proxynet_a_params"] + 2
    assert b.params - a.params == 2 * stage


def test_toy_config_hand_tally():
    c = count_params_flops(NetConfig(N=2, k=3, C=6, unet_depth=2, scab_kernel=11), 32, 32, bands=8, step=2)
    # parameters, layer by layer (weights + biases)
    init = (6 * 3 + 6) + (6 * 4 * 9 + 6)  # Conv1d(3->6, 1), Conv2d(4->6, 3x3)
    proxy_e = 2 * ((12 * 6 * 3 + 12) + (6 * 12 * 3 + 6))  # two ResBlock1d(6)
    scab = lambda c: 2 * c + 3 * (c * c + c) + (c * 121 + c) + (2 * c * c + 2 * c) + (2 * c * c + c)
    assert scab(6) == 1032 and scab(12) == 2568
    proxy_a = scab(6) + (12 * 6 * 4 + 12) + scab(12) + (12 * 6 * 4 + 6) + (6 * 12 + 6) + scab(6) + (6 * 6 * 9 + 6)
    assert proxy_a == 5634
    assert c.params == init + 2 * (proxy_e + proxy_a) + 4 == 13318
    # multiply-accumulates on a 32x32x8 scene
    init_m = 6 * 3 * 8 + 6 * 4 * 9 * 1024
    e_m = 2 * 2 * (6 * 12 * 3) * 8
    scab_m = lambda c, px: (7 * c * c + c * 121) * px
    a_m = 2 * scab_m(6, 1024) + 12 * 6 * 4 * 256 + scab_m(12, 256) + 12 * 6 * 4 * 256 + 12 * 6 * 1024 + 6 * 6 * 9 * 1024
    df_m = 2 * (2 * 1024 * 8 * 3)
    stage_m = e_m + a_m + df_m + 8 * 3 * 3 + 1024 * 8 * 3
    assert c.macs == init_m + 2 * stage_m == 6852384
    # FLOPs: 2 per MAC plus elementwise data-fidelity work (W' = 46)
    elem = (3 * 8192 + 32 * 46 + 2 * 24) + (3 * 8192 + 32 * 46 + 2 * 3072)
    assert c.flops == 2 * c.macs + 2 * elem == 13821344
