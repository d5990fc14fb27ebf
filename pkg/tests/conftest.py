import numpy as np
import pytest

from lrsci import SensingSpec

# filled by test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line[1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_spec(rng, H, W, B, step, binary=False):
    mask = rng.random((H, W))
    if binary:
        mask = (mask < 0.5).astype(float)
    return SensingSpec(mask, bands=B, step=step)


@pytest.fixture
def tiny_spec(rng):
    return make_spec(rng, 4, 3, 3, 1)


def perturb_parameters(module, scale=0.1, seed=0):
    """Add noise to every parameter so zero-initialized layers take part in gradient checks."""
    import torch

    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in module.parameters():
            p.add_(scale * torch.randn(p.shape, generator=gen, dtype=p.dtype))


def fd_parameter_check(module, loss_fn, count=20, h=1e-6, seed=0):
    """Worst relative gap between autograd and central differences at ``count`` random parameter entries.

    The gap is ``|fd - an| / max(|fd|, |an|)``; entries whose gradients are both
    below 1e-9 in magnitude count as agreeing.
    """
    import torch

    params = [p for p in module.parameters() if p.requires_grad]
    sizes = np.array([p.numel() for p in params])
    rng = np.random.default_rng(seed)
    flat = rng.choice(sizes.sum(), size=min(count, sizes.sum()), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    worst = 0.0
    for f in flat:
        i = int(np.searchsorted(offsets, f, side="right") - 1)
        j = int(f - offsets[i])
        p = params[i].view(-1)
        an = 0.0 if grads[i] is None else float(grads[i].reshape(-1)[j])
        with torch.no_grad():
            p[j] += h
            lp = float(loss_fn())
            p[j] -= 2 * h
            lm = float(loss_fn())
            p[j] += h
        fd = (lp - lm) / (2 * h)
        scale = max(abs(fd), abs(an))
        if scale > 1e-9:
            worst = max(worst, abs(fd - an) / scale)
    return worst
