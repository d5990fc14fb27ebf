"""Training loop, multi-stage loss and weight (de)serialization for LRDUN."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .. import cassi, io
from ..errors import DivergenceError
from ..metrics import capped_psnr
from ..solver import _open_text
from .lrdun import LRDUN, NetConfig

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 4e-4
    epochs: int = 300
    batch_size: int = 2
    steps: int | None = None  # overrides epochs when set
    crop: int | None = None
    seed: int = 0
    dtype: str = "float32"
    deterministic: bool = True

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("learning rate must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be >= 1")

    def total_steps(self, n_samples: int) -> int:
        if self.steps is not None:
            return self.steps
        return self.epochs * math.ceil(n_samples / self.batch_size)


@dataclass
class TrainLog:
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    lrs: list = field(default_factory=list)

    def append(self, step, loss, lr):
        self.steps.append(step)
        self.losses.append(loss)
        self.lrs.append(lr)

    def to_csv(self, target):
        """Write the log to a path or an open text file."""
        with _open_text(target) as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "loss", "lr"])
            for row in zip(self.steps, self.losses, self.lrs):
                writer.writerow([row[0], repr(row[1]), repr(row[2])])


def multi_stage_loss(stage_cubes, x_gt):
    """Sum over stages of the RMSE between each stage's cube and the ground truth."""
    total = 0.0
    for X in stage_cubes:
        if X.shape != x_gt.shape:
            raise ValueError(f"stage output {tuple(X.shape)} does not match target {tuple(x_gt.shape)}")
        total = total + torch.sqrt(torch.mean((X - x_gt) ** 2))
    return total


def _torch_dtype(name):
    return {"float32": torch.float32, "float64": torch.float64}[name]


def sample_batch(dataset, spec, batch_size, rng, crop=None, dtype=torch.float32):
    """Random cubes (random crops when ``crop`` is set) and their noiseless measurements."""
    idx = rng.integers(0, len(dataset), size=batch_size)
    cubes = []
    for i in idx:
        cube = dataset[i]
        if crop is not None and crop < min(cube.shape[:2]):
            t = rng.integers(0, cube.shape[0] - crop + 1)
            l = rng.integers(0, cube.shape[1] - crop + 1)
            cube = cube[t : t + crop, l : l + crop]
        cubes.append(cube)
    x = np.stack(cubes)
    y = cassi.forward(x, spec)
    return torch.as_tensor(y, dtype=dtype), torch.as_tensor(x, dtype=dtype)


def train(dataset, spec: cassi.SensingSpec, model: LRDUN | NetConfig, cfg: TrainConfig):
    """Adam on the multi-stage RMSE with a cosine-annealed learning rate.

    ``model`` may be a ready network or a :class:`NetConfig`. Step sizes are
    calibrated on the first batch unless the network already is. Returns
    ``(model, TrainLog)``.
    """
    if len(dataset) == 0:
        raise ValueError("training set is empty")
    if isinstance(model, NetConfig):
        model = LRDUN(model)
    dtype = _torch_dtype(cfg.dtype)
    model = model.to(dtype)
    if cfg.deterministic:
        torch.use_deterministic_algorithms(True)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    dataset = [np.asarray(c, dtype=np.float64) for c in dataset]

    total = cfg.total_steps(len(dataset))
    batches = (sample_batch(dataset, spec, cfg.batch_size, rng, cfg.crop, dtype) for _ in range(total))
    first = next(batches)
    if not bool(model.calibrated):
        model.calibrate_steps(first[0], spec)

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=total, eta_min=0.0)
    history = TrainLog()
    model.train()
    for step, (y, x) in enumerate(_chain(first, batches), start=1):
        lr = optimizer.param_groups[0]["lr"]
        optimizer.zero_grad(set_to_none=True)
        stages, _ = model(y, spec)
        loss = multi_stage_loss([s[2] for s in stages], x)
        value = float(loss.detach())
        if not math.isfinite(value):
            raise DivergenceError(f"non-finite loss at step {step}", history)
        loss.backward()
        optimizer.step()
        scheduler.step()
        history.append(step, value, lr)
        if step % 50 == 0 or step == 1:
            log.info("step %d/%d loss %.5f lr %.2e", step, total, value, lr)
    model.eval()
    return model, history


def _chain(first, rest):
    yield first
    yield from rest


@torch.no_grad()
def reconstruct(model: LRDUN, y, spec):
    """Final-stage cube(s) as a float64 numpy array."""
    param = next(model.parameters())
    y = torch.as_tensor(np.asarray(y), dtype=param.dtype)
    _, X = model(y, spec)
    out = X.double().numpy()
    return out[0] if np.ndim(y) == 2 else out


def mean_psnr(model: LRDUN, cubes, spec) -> float:
    cubes = np.stack(cubes)
    recon = reconstruct(model, cassi.forward(cubes, spec), spec)
    return float(np.mean([capped_psnr(r, c) for r, c in zip(recon, cubes)]))


def model_bytes(model: LRDUN, **meta) -> bytes:
    """LRSCI1 ``weights`` encoding of every parameter (as f64) plus the calibration flag."""
    tensors = {name: p.detach().cpu().double().numpy() for name, p in model.named_parameters()}
    tensors["calibrated"] = np.array([float(bool(model.calibrated))])
    return io.encode_weights(tensors, dtype="f64", net_config=asdict(model.cfg), **meta)


def save_model(path, model: LRDUN, **meta):
    io.atomic_write_bytes(path, model_bytes(model, **meta))


def load_model(path) -> LRDUN:
    tensors, header = io.load_weights(path)
    model = LRDUN(NetConfig(**header["net_config"])).double()
    params = dict(model.named_parameters())
    missing = set(params) - set(tensors)
    if missing:
        raise ValueError(f"weights file lacks parameters: {sorted(missing)}")
    with torch.no_grad():
        for name, p in params.items():
            p.copy_(torch.as_tensor(tensors[name]))
        model.calibrated.fill_(bool(tensors.get("calibrated", [0.0])[0]))
    model.eval()
    return model
