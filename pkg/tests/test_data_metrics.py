import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrsci import metrics
from lrsci.data import SynthSpec, crop_sampler, random_mask, synth_hsi
from lrsci.lowrank import compose, decompose_truncated_svd


@pytest.mark.parametrize("kwargs", [dict(H=0), dict(rank=0), dict(rank=9, B=8), dict(smoothness=-1.0)])
def test_synth_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SynthSpec(**kwargs)


@pytest.mark.parametrize("seed", range(4))
def test_synth_cube_is_exactly_low_rank(seed):
    spec = SynthSpec(32, 32, 8, 3, 2.0, seed)
    cube, E, A = synth_hsi(spec)
    s = np.linalg.svd(cube.reshape(-1, 8), compute_uv=False)
    assert s[3:].max() <= 1e-8 * s[0]
    E_hat, A_hat = decompose_truncated_svd(cube, 3)
    assert np.linalg.norm(compose(A_hat, E_hat) - cube) <= 1e-8 * np.linalg.norm(cube)


def test_synth_factors_compose_to_cube():
    cube, E, A = synth_hsi(SynthSpec(seed=5))
    np.testing.assert_allclose(E.T @ E, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(compose(A, E), cube, atol=1e-12)


def test_synth_clip_perturbation_is_bounded():
    # composition is nonnegative by construction; the final clip must not alter it measurably
    for seed in range(4):
        cube, E, A = synth_hsi(SynthSpec(seed=seed))
        assert np.abs(compose(A, E) - cube).max() <= 1e-12


def test_synth_range_and_determinism():
    a, _, _ = synth_hsi(SynthSpec(seed=3))
    b, _, _ = synth_hsi(SynthSpec(seed=3))
    c, _, _ = synth_hsi(SynthSpec(seed=4))
    assert a.min() >= 0.0 and a.max() == 1.0
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_random_mask_density():
    m = random_mask(200, 200, seed=1)
    assert set(np.unique(m)) <= {0.0, 1.0}
    assert abs(m.mean() - 0.5) < 0.01


def test_crop_full_size_repeats():
    cube = np.arange(4 * 4 * 2, dtype=float).reshape(4, 4, 2)
    crops = crop_sampler(cube, 4, 3, seed=0)
    assert len(crops) == 3
    for c in crops:
        np.testing.assert_array_equal(c, cube)


def test_crops_in_bounds_and_deterministic():
    cube = np.random.default_rng(0).random((20, 15, 3))
    crops = crop_sampler(cube, 6, 50, seed=9)
    again = crop_sampler(cube, 6, 50, seed=9)
    for c, d in zip(crops, again):
        assert c.shape == (6, 6, 3)
        np.testing.assert_array_equal(c, d)
        # the crop must occur somewhere inside the cube
        hits = [
            (t, l)
            for t in range(20 - 5)
            for l in range(15 - 5)
            if np.array_equal(cube[t : t + 6, l : l + 6], c)
        ]
        assert hits


def test_crop_too_large():
    with pytest.raises(ValueError):
        crop_sampler(np.zeros((4, 5, 2)), 5, 1)


def test_psnr_closed_form():
    ref = np.zeros((10, 10, 4))
    x = ref + 0.1  # MSE 0.01
    assert metrics.psnr(x, ref) == pytest.approx(20.0, abs=1e-12)


def test_psnr_identical_is_infinite_and_capped():
    x = np.random.default_rng(0).random((4, 4, 2))
    assert metrics.psnr(x, x) == math.inf
    assert metrics.capped_psnr(x, x) == metrics.PSNR_CAP_DB == 100.0


def test_psnr_noise_sigma_0_1():
    rng = np.random.default_rng(0)
    ref = rng.random((256, 256, 28))
    x = ref + rng.normal(0, 0.1, ref.shape)
    assert metrics.psnr(x, ref) == pytest.approx(20.0, abs=0.05)


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        metrics.psnr(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))


def test_psnr_decreases_with_more_noise():
    rng = np.random.default_rng(1)
    ref = rng.random((32, 32, 4))
    noise = rng.standard_normal(ref.shape)
    values = [metrics.psnr(ref + s * noise, ref) for s in (0.01, 0.02, 0.05, 0.1)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_ssim_identity_exact():
    x = np.random.default_rng(0).random((24, 24, 3))
    assert metrics.ssim(x, x) == 1.0


def test_ssim_large_noise_on_constant_reference():
    rng = np.random.default_rng(0)
    ref = np.full((64, 64, 4), 0.5)
    x = ref + rng.normal(0, 1.0, ref.shape)
    assert abs(metrics.ssim(x, ref)) < 0.2


def test_ssim_gaussian_window_is_11x11():
    from scipy.ndimage import gaussian_filter

    impulse = np.zeros((21, 21))
    impulse[10, 10] = 1.0
    support = gaussian_filter(impulse, 1.5, truncate=3.5) > 0
    rows, cols = np.nonzero(support)
    assert rows.max() - rows.min() + 1 == 11 and cols.max() - cols.min() + 1 == 11


def test_ssim_matches_naive_windowed_formula():
    # independent implementation: explicit 11x11 normalized Gaussian, valid positions only
    rng = np.random.default_rng(4)
    x = rng.random((27, 27))
    y = np.clip(x + 0.1 * rng.standard_normal(x.shape), 0, 1)
    g = np.exp(-(np.arange(-5, 6) ** 2) / (2 * 1.5**2))
    w = np.outer(g, g)
    w /= w.sum()
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    for i in range(5, 22):
        for j in range(5, 22):
            px, py = x[i - 5 : i + 6, j - 5 : j + 6], y[i - 5 : i + 6, j - 5 : j + 6]
            mx, my = (w * px).sum(), (w * py).sum()
            vx = (w * px * px).sum() - mx * mx
            vy = (w * py * py).sum() - my * my
            cxy = (w * px * py).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    assert metrics.ssim(x[..., None], y[..., None]) == pytest.approx(np.mean(vals), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ssim_symmetric(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.random((2, 16, 16, 2))
    assert metrics.ssim(x, y) == pytest.approx(metrics.ssim(y, x), abs=1e-14)


def test_ssim_invariant_when_inputs_and_peak_scale_together():
    rng = np.random.default_rng(2)
    x = rng.random((20, 20, 2))
    y = np.clip(x + 0.05 * rng.standard_normal(x.shape), 0, 1)
    for factor in (0.5, 4.0, 255.0):
        assert metrics.ssim(factor * x, factor * y, peak=factor) == pytest.approx(metrics.ssim(x, y), rel=1e-12)


def test_ssim_offset_with_matching_means_is_invariant():
    # with identical local means the luminance factor is exactly 1 before and after the offset
    rng = np.random.default_rng(3)
    x = rng.random((20, 20, 1))
    assert metrics.ssim(x + 0.5, x + 0.5, peak=1.5) == metrics.ssim(x, x) == 1.0


def test_per_band_psnr():
    ref = np.zeros((8, 8, 3))
    x = ref.copy()
    x[..., 1] += 0.1
    np.testing.assert_allclose(metrics.per_band_psnr(x, ref), [100.0, 20.0, 100.0])
