"""``lrsci`` command line: simulate, solve, train, reconstruct, eval, oracle-check, report.

Exit codes: 0 ok, 2 invalid input, 3 diverged, 4 oracle failure. Every output
file is staged in memory and renamed into place only after the command has
succeeded, so a failing command leaves nothing behind.

A ``--config`` JSON file may hold the sections ``synth``, ``solver``, ``net``,
``train``, ``sensing`` and ``paths``; keys are the field names of the
corresponding config dataclasses and unknown keys are rejected. Explicit flags
override the file.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import cassi, io, oracles, prox
from .data import SynthSpec, random_mask, synth_hsi
from .errors import DegenerateInputError, DivergenceError, ResourceLimitError
from .metrics import capped_psnr, per_band_psnr, ssim
from .solver import SolverConfig, config_summary, solve_alternating

log = logging.getLogger("lrsci")

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_ORACLE = 0, 2, 3, 4

SENSING_KEYS = {"step": int, "noise": float, "mask_seed": int, "mask_density": float, "count": int}
PATH_KEYS = {"hsi", "mask", "meas", "weights", "out", "out_dir", "x", "ref", "train_log", "trace"}


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


# ---------------------------------------------------------------- config plumbing


def _typed_configs():
    from .net.lrdun import NetConfig
    from .net.train import TrainConfig

    return {"synth": SynthSpec, "solver": SolverConfig, "net": NetConfig, "train": TrainConfig}


def _coerce(value: str, default):
    text = value.strip()
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise InputError(f"expected a boolean, got {value!r}")
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_kv(text: str, cls) -> dict:
    """``"H=32,W=32"`` into a dict checked against the fields of ``cls``."""
    allowed = {f.name: f.default for f in fields(cls) if f.init}
    out = {}
    for item in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"expected key=value, got {item!r}")
        if key not in allowed:
            raise InputError(f"unknown {cls.__name__} key {key!r}; allowed: {sorted(allowed)}")
        out[key] = _coerce(value, allowed[key])
    return out


def load_config(path) -> dict:
    """Read and validate a JSON run configuration; unknown keys are errors."""
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise InputError("config file must hold a JSON object")
    typed = _typed_configs()
    allowed_sections = set(typed) | {"sensing", "paths"}
    for section, body in raw.items():
        if section not in allowed_sections:
            raise InputError(f"unknown config section {section!r}; allowed: {sorted(allowed_sections)}")
        if not isinstance(body, dict):
            raise InputError(f"config section {section!r} must be an object")
        if section in typed:
            keys = {f.name for f in fields(typed[section]) if f.init}
        else:
            keys = set(SENSING_KEYS) if section == "sensing" else PATH_KEYS
        unknown = set(body) - keys
        if unknown:
            raise InputError(f"unknown keys in [{section}]: {sorted(unknown)}; allowed: {sorted(keys)}")
    return raw


def _build(cls, *layers):
    merged = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid {cls.__name__}: {exc}") from None


def _pick(args, cfg, section, key, default=None):
    """Flag value, else config value, else ``default``."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    return cfg.get(section, {}).get(key, default)


# ---------------------------------------------------------------- staged outputs


class Outputs:
    """Files written only on :meth:`commit`, each via temp file + rename."""

    def __init__(self):
        self._files = {}

    def add_bytes(self, path, data: bytes):
        self._files[Path(path)] = data

    def add_tensor(self, path, array, kind, **meta):
        self.add_bytes(path, io.encode(array, kind, **meta))

    def add_text(self, path, text: str):
        self.add_bytes(path, text.encode("utf-8"))

    def add_csv(self, path, header, rows):
        buf = _stdio.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        self.add_text(path, buf.getvalue())

    def commit(self):
        for path in self._files:
            path.parent.mkdir(parents=True, exist_ok=True)
        for path, data in self._files.items():
            io.atomic_write_bytes(path, data)
            log.info("wrote %s", path)

    def __iter__(self):
        return iter(self._files)


# ---------------------------------------------------------------- input helpers


def _require_file(path, what):
    if path is None:
        raise InputError(f"missing {what} path")
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{what} file not found: {path}")
    return path


def _load(path, kind, what=None):
    path = _require_file(path, what or kind)
    try:
        array, header = io.load_tensor(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if header.get("kind") != kind:
        raise InputError(f"{path} holds kind {header.get('kind')!r}, expected {kind!r}")
    return array.astype(np.float64), header


def _sidecar_for(meas_path):
    side = Path(meas_path).with_suffix(".json")
    if side.is_file():
        return side, json.loads(side.read_text())
    return None, {}


def _sensing_from_meas(args, cfg, meas_path, header):
    """Rebuild the sensing spec of a measurement from flags, its header and its sidecar."""
    side_path, side = _sidecar_for(meas_path)
    mask_path = _pick(args, cfg, "paths", "mask")
    if mask_path is None and side.get("mask"):
        mask_path = side_path.parent / side["mask"]
    mask, _ = _load(mask_path, "mask", "mask (pass --mask or keep the simulate sidecar)")
    bands = getattr(args, "bands", None) or header.get("bands") or side.get("bands")
    step = _pick(args, cfg, "sensing", "step")
    if step is None:
        step = header.get("step", side.get("step"))
    if bands is None or step is None:
        raise InputError("band count and dispersion step are unknown; pass --bands and --step")
    try:
        spec = cassi.SensingSpec(mask, bands=int(bands), step=int(step))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return spec, side, side_path


# ---------------------------------------------------------------- commands


def cmd_simulate(args, cfg):
    out = Path(_pick(args, cfg, "paths", "out") or "m.lrsci")
    step = _pick(args, cfg, "sensing", "step", 2)
    noise = _pick(args, cfg, "sensing", "noise", 0.0)
    density = _pick(args, cfg, "sensing", "mask_density", 0.5)
    hsi_path = _pick(args, cfg, "paths", "hsi")
    mask_path = _pick(args, cfg, "paths", "mask")
    outputs = Outputs()
    synth = None
    if args.synth is not None or (hsi_path is None and "synth" in cfg):
        layers = [cfg.get("synth", {}), parse_kv(args.synth or "", SynthSpec)]
        if "seed" not in layers[0] and "seed" not in layers[1]:
            layers.append({"seed": args.seed})
        synth = _build(SynthSpec, *layers)
        cube, _, _ = synth_hsi(synth)
    elif hsi_path is not None:
        cube, _ = _load(hsi_path, "hsi")
        if cube.ndim != 3:
            raise InputError(f"hsi must be H x W x B, got shape {cube.shape}")
    else:
        raise InputError("simulate needs --synth or --hsi")

    H, W, B = cube.shape
    if mask_path is not None:
        mask, _ = _load(mask_path, "mask")
        if mask.shape != (H, W):
            raise InputError(f"mask shape {mask.shape} does not match scene {(H, W)}")
        mask_ref = str(Path(mask_path).resolve())
    else:
        mask_seed = _pick(args, cfg, "sensing", "mask_seed", args.seed)
        mask = random_mask(H, W, seed=mask_seed, density=density)
        mask_file = out.with_name(out.stem + ".mask.lrsci")
        outputs.add_tensor(mask_file, mask, "mask")
        mask_ref = mask_file.name
    try:
        spec = cassi.SensingSpec(mask, bands=B, step=step)
        meas = cassi.simulate(cube, spec, sigma=noise, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None

    gt_ref = str(Path(hsi_path).resolve()) if synth is None else None
    if synth is not None:
        gt_file = out.with_name(out.stem + ".gt.lrsci")
        outputs.add_tensor(gt_file, cube, "hsi")
        gt_ref = gt_file.name
    outputs.add_tensor(out, meas.data, "meas", step=step, noise_sigma=float(noise), bands=B)
    sidecar = {
        "height": H,
        "width": W,
        "bands": B,
        "step": step,
        "noise_sigma": float(noise),
        "seed": args.seed,
        "mask": mask_ref,
        "ground_truth": gt_ref,
        "synth": asdict(synth) if synth is not None else None,
    }
    outputs.add_text(out.with_suffix(".json"), json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    outputs.commit()
    print(f"measurement {meas.data.shape} -> {out}")
    return EXIT_OK


def _solver_config(args, cfg):
    flags = {
        "k": args.k,
        "max_iters": args.max_iters,
        "rho_e": args.rho_e,
        "rho_a": args.rho_a,
        "prox_e": args.prox_e,
        "prox_a": args.prox_a,
        "lambda_e": args.lambda_e,
        "lambda_a": args.lambda_a,
        "tol": args.tol,
        "seed": args.seed if args.seed_given else None,
    }
    layers = [{"seed": args.seed}, cfg.get("solver", {}), flags]
    return _build(SolverConfig, *layers)


def _parse_step(text):
    if text is None or text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"step size must be 'auto' or a number, got {text!r}") from None


def cmd_solve(args, cfg):
    meas_path = _pick(args, cfg, "paths", "meas")
    y, header = _load(meas_path, "meas", "measurement")
    spec, side, side_path = _sensing_from_meas(args, cfg, meas_path, header)
    if y.shape != spec.meas_shape:
        raise InputError(f"measurement shape {y.shape} does not match sensing spec {spec.meas_shape}")
    solver_cfg = _solver_config(args, cfg)
    if solver_cfg.k > spec.bands:
        raise InputError(f"rank k={solver_cfg.k} exceeds band count {spec.bands}")
    out_dir = Path(_pick(args, cfg, "paths", "out_dir") or ".")
    summary = config_summary(solver_cfg)
    outputs = Outputs()
    trace_buf = _stdio.StringIO()
    try:
        E, A, X, trace = solve_alternating(y, spec, solver_cfg)
    except DivergenceError as exc:
        exc.trace.to_csv(trace_buf, header_comment=summary)
        outputs.add_text(out_dir / "trace.csv", trace_buf.getvalue())
        outputs.commit()
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    trace.to_csv(trace_buf, header_comment=summary)
    outputs.add_tensor(out_dir / "basis.lrsci", E, "basis")
    outputs.add_tensor(out_dir / "subspace.lrsci", A, "subspace")
    outputs.add_tensor(out_dir / "hsi.lrsci", X, "hsi")
    outputs.add_text(out_dir / "trace.csv", trace_buf.getvalue())
    outputs.commit()
    msg = f"{len(trace)} iterations"
    if len(trace):
        msg += f", rel residual {trace.rel_residuals[-1]:.3e}"
    ref_path = args.ref or (side_path.parent / side["ground_truth"] if side.get("ground_truth") else None)
    if ref_path is not None and Path(ref_path).is_file():
        ref, _ = _load(ref_path, "hsi")
        msg += f", PSNR {capped_psnr(X, ref):.2f} dB"
    print(msg)
    return EXIT_OK


def _training_set(args, cfg):
    hsi_paths = args.hsi or []
    if hsi_paths:
        cubes = [_load(p, "hsi")[0] for p in hsi_paths]
        shapes = {c.shape for c in cubes}
        if len(shapes) != 1:
            raise InputError(f"training cubes differ in shape: {sorted(shapes)}")
        return cubes
    count = _pick(args, cfg, "sensing", "count", 16)
    base = _build(SynthSpec, {"seed": args.seed}, cfg.get("synth", {}), parse_kv(args.synth or "", SynthSpec))
    return [synth_hsi(_build(SynthSpec, asdict(base), {"seed": base.seed + i}))[0] for i in range(count)]


def cmd_train(args, cfg):
    import torch

    from .net.lrdun import LRDUN, NetConfig
    from .net.train import TrainConfig, _torch_dtype, model_bytes, train

    out_dir = Path(_pick(args, cfg, "paths", "out_dir") or ".")
    cubes = _training_set(args, cfg)
    H, W, B = cubes[0].shape
    mask_path = _pick(args, cfg, "paths", "mask")
    if mask_path is not None:
        mask, _ = _load(mask_path, "mask")
        if mask.shape != (H, W):
            raise InputError(f"mask shape {mask.shape} does not match scenes {(H, W)}")
    else:
        mask = random_mask(H, W, seed=_pick(args, cfg, "sensing", "mask_seed", args.seed))
    spec = cassi.SensingSpec(mask, bands=B, step=_pick(args, cfg, "sensing", "step", 2))

    net_cfg = _build(
        NetConfig,
        {"seed": args.seed},
        cfg.get("net", {}),
        {"N": args.stages, "k": args.k, "C": args.channels, "share_weights": args.share_weights},
    )
    train_cfg = _build(
        TrainConfig,
        {"seed": args.seed},
        cfg.get("train", {}),
        {"lr": args.lr, "epochs": args.epochs, "steps": args.steps, "batch_size": args.batch_size},
    )
    if net_cfg.k > B:
        raise InputError(f"rank k={net_cfg.k} exceeds band count {B}")

    model = LRDUN(net_cfg).to(_torch_dtype(train_cfg.dtype))
    y_all = torch.as_tensor(cassi.forward(np.stack(cubes), spec), dtype=_torch_dtype(train_cfg.dtype))
    model.calibrate_steps(y_all, spec)
    meta = {"step": spec.step, "bands": B}
    init_path = out_dir / "init.lrsci"
    weights_path = out_dir / "weights.lrsci"
    outputs = Outputs()
    outputs.add_bytes(init_path, model_bytes(model, **meta))
    try:
        model, history = train(cubes, spec, model, train_cfg)
    except DivergenceError as exc:
        buf = _stdio.StringIO()
        exc.trace.to_csv(buf)
        outputs.add_text(out_dir / "train_log.csv", buf.getvalue())
        outputs.commit()
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    outputs.add_bytes(weights_path, model_bytes(model, **meta))
    outputs.add_tensor(out_dir / "mask.lrsci", mask, "mask")
    buf = _stdio.StringIO()
    history.to_csv(buf)
    outputs.add_text(out_dir / "train_log.csv", buf.getvalue())
    outputs.commit()
    print(f"{len(history.losses)} steps, loss {history.losses[0]:.4f} -> {history.losses[-1]:.4f}")
    return EXIT_OK


def cmd_reconstruct(args, cfg):
    from .net.train import load_model, reconstruct

    weights_path = _require_file(_pick(args, cfg, "paths", "weights"), "weights")
    meas_path = _pick(args, cfg, "paths", "meas")
    y, header = _load(meas_path, "meas", "measurement")
    spec, _, _ = _sensing_from_meas(args, cfg, meas_path, header)
    if y.shape != spec.meas_shape:
        raise InputError(f"measurement shape {y.shape} does not match sensing spec {spec.meas_shape}")
    try:
        model = load_model(weights_path)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot load weights {weights_path}: {exc}") from None
    if model.cfg.k > spec.bands:
        raise InputError(f"network rank {model.cfg.k} exceeds band count {spec.bands}")
    X = reconstruct(model, y, spec)
    out = Path(_pick(args, cfg, "paths", "out") or "hsi.lrsci")
    outputs = Outputs()
    outputs.add_tensor(out, X, "hsi")
    outputs.commit()
    print(f"reconstruction {X.shape} -> {out}")
    return EXIT_OK


def _pairs(args, cfg):
    xs = args.x or _as_list(cfg.get("paths", {}).get("x"))
    refs = args.ref or _as_list(cfg.get("paths", {}).get("ref"))
    if not xs or not refs:
        raise InputError("need --x and --ref")
    if len(xs) != len(refs):
        raise InputError(f"{len(xs)} reconstructions but {len(refs)} references")
    pairs = []
    for x_path, ref_path in zip(xs, refs):
        x, _ = _load(x_path, "hsi")
        ref, _ = _load(ref_path, "hsi")
        if x.shape != ref.shape:
            raise InputError(f"{x_path} has shape {x.shape} but {ref_path} has {ref.shape}")
        pairs.append((Path(x_path).stem, x, ref))
    return pairs


def _as_list(value):
    if value is None:
        return []
    return [value] if isinstance(value, str) else list(value)


def cmd_eval(args, cfg):
    pairs = _pairs(args, cfg)
    score = lambda p: (p[0], capped_psnr(p[1], p[2]), ssim(p[1], p[2]))
    with ThreadPoolExecutor(max(1, args.threads)) as pool:
        rows = list(pool.map(score, pairs))
    out = Path(_pick(args, cfg, "paths", "out") or "metrics.csv")
    outputs = Outputs()
    outputs.add_csv(out, ["scene", "psnr_db", "ssim"], [(s, f"{p:.6f}", f"{q:.6f}") for s, p, q in rows])
    outputs.commit()
    for scene, p, q in rows:
        print(f"{scene}: PSNR {p:.2f} dB, SSIM {q:.4f}")
    return EXIT_OK


def cmd_oracle_check(args, cfg):
    results = oracles.run_all(seed=args.seed)
    for r in results:
        print(r)
        if not r.ok:
            print(f"first failing case: {r.name}", file=sys.stderr)
            return EXIT_ORACLE
    print(f"all {len(results)} oracles passed")
    return EXIT_OK


def _read_csv_columns(path, columns):
    path = _require_file(path, "csv")
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(rows)
    missing = set(columns) - set(reader.fieldnames or [])
    if missing:
        raise InputError(f"{path} lacks columns {sorted(missing)}")
    return [[row[c] for c in columns] for row in reader]


def cmd_report(args, cfg):
    out_dir = Path(_pick(args, cfg, "paths", "out_dir") or ".")
    outputs = Outputs()
    curves = {}
    if args.x or args.ref:
        for scene, x, ref in _pairs(args, cfg):
            values = per_band_psnr(x, ref)
            name = out_dir / f"{scene}_band_psnr.csv"
            outputs.add_csv(name, ["band", "psnr_db"], [(b, f"{v:.6f}") for b, v in enumerate(values)])
            curves[name] = ("band", "psnr_db", list(enumerate(values)))
    if args.train_log:
        rows = _read_csv_columns(args.train_log, ["step", "loss"])
        name = out_dir / "loss_curve.csv"
        outputs.add_csv(name, ["step", "loss"], rows)
        curves[name] = ("step", "loss", [(int(s), float(v)) for s, v in rows])
    if args.trace:
        rows = _read_csv_columns(args.trace, ["iter", "objective", "rel_residual"])
        name = out_dir / "solver_curve.csv"
        outputs.add_csv(name, ["iter", "objective", "rel_residual"], rows)
        curves[name] = ("iter", "rel_residual", [(int(i), float(r)) for i, _, r in rows])
    if not curves:
        raise InputError("report needs --x/--ref, --train-log or --trace")
    if args.plot:
        for name, (xlab, ylab, points) in curves.items():
            outputs.add_bytes(name.with_suffix(".png"), _render(xlab, ylab, points))
    outputs.commit()
    for name in outputs:
        print(name)
    return EXIT_OK


def _render(xlab, ylab, points) -> bytes:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise InputError("--plot needs matplotlib, which is not installed") from None
    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs, ys = zip(*points)
    ax.plot(xs, ys)
    ax.set_xlabel(xlab)
    ax.set_ylabel(ylab)
    if ylab == "rel_residual":
        ax.set_yscale("log")
    fig.tight_layout()
    buf = _stdio.BytesIO()
    fig.savefig(buf, format="png")
    plt.close(fig)
    return buf.getvalue()


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for batch eval and per-channel TV")
    common.add_argument("--config", help="JSON run configuration (sections synth/solver/net/train/sensing/paths)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="lrsci", description="Low-rank CASSI reconstruction toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a CASSI measurement")
    p.add_argument("--synth", help="synthetic scene, e.g. H=32,W=32,B=8,rank=3[,smoothness=2,seed=0]")
    p.add_argument("--hsi", help="LRSCI1 hsi file to measure instead of a synthetic scene")
    p.add_argument("--mask", help="LRSCI1 mask file (default: random binary mask)")
    p.add_argument("--mask-seed", dest="mask_seed", type=int, help="seed of the random mask (default --seed)")
    p.add_argument("--mask-density", dest="mask_density", type=float, help="open fraction of the random mask")
    p.add_argument("--step", type=int, help="dispersion step in pixels per band (default 2)")
    p.add_argument("--noise", type=float, help="Gaussian noise sigma (default 0)")
    p.add_argument("--out", help="measurement file (default m.lrsci); a .json sidecar is written beside it")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve", parents=[common], help="classical alternating low-rank reconstruction")
    p.add_argument("--meas", help="LRSCI1 measurement file")
    p.add_argument("--mask", help="mask file (default: from the measurement's sidecar)")
    p.add_argument("--bands", type=int, help="band count if the measurement header lacks it")
    p.add_argument("--step", type=int, help="dispersion step if the measurement header lacks it")
    p.add_argument("--ref", help="ground-truth hsi for a PSNR printout")
    p.add_argument("--k", type=int, help="rank of the spectral basis (default 3)")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="iteration budget (default 500)")
    p.add_argument("--rho-e", dest="rho_e", type=_parse_step, help="basis step size or 'auto'")
    p.add_argument("--rho-a", dest="rho_a", type=_parse_step, help="subspace step size or 'auto'")
    p.add_argument("--prox-e", dest="prox_e", help="basis prox: qr, identity, l1, tv")
    p.add_argument("--prox-a", dest="prox_a", help="subspace prox: identity, l1, tv")
    p.add_argument("--lambda-e", dest="lambda_e", type=float, help="basis prox strength")
    p.add_argument("--lambda-a", dest="lambda_a", type=float, help="subspace prox strength")
    p.add_argument("--tol", type=float, help="stop when the relative residual drops below this")
    p.add_argument("--out-dir", dest="out_dir", help="directory for basis/subspace/hsi/trace outputs")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", parents=[common], help="train the unfolding network")
    p.add_argument("--hsi", nargs="+", help="training cubes (default: synthetic scenes)")
    p.add_argument("--synth", help="synthetic scene spec for the training set")
    p.add_argument("--count", type=int, help="number of synthetic training scenes (default 16)")
    p.add_argument("--mask", help="mask file (default: random binary mask)")
    p.add_argument("--mask-seed", dest="mask_seed", type=int, help="seed of the random mask")
    p.add_argument("--step", type=int, help="dispersion step (default 2)")
    p.add_argument("--stages", type=int, help="number of unfolded stages N")
    p.add_argument("--k", type=int, help="physical rank k")
    p.add_argument("--channels", type=int, help="feature channels C")
    p.add_argument("--share-weights", dest="share_weights", action="store_const", const=True, help="one set of stage weights")
    p.add_argument("--lr", type=float, help="Adam learning rate (default 4e-4)")
    p.add_argument("--epochs", type=int, help="epochs over the training set")
    p.add_argument("--steps", type=int, help="optimizer steps (overrides --epochs)")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="batch size (default 2)")
    p.add_argument("--out-dir", dest="out_dir", help="directory for weights.lrsci, init.lrsci, train_log.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", parents=[common], help="apply trained weights to a measurement")
    p.add_argument("--weights", help="weights file from train")
    p.add_argument("--meas", help="LRSCI1 measurement file")
    p.add_argument("--mask", help="mask file (default: from the measurement's sidecar)")
    p.add_argument("--bands", type=int, help="band count if the measurement header lacks it")
    p.add_argument("--step", type=int, help="dispersion step if the measurement header lacks it")
    p.add_argument("--out", help="output hsi file (default hsi.lrsci)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", parents=[common], help="PSNR/SSIM of reconstructions against references")
    p.add_argument("--x", nargs="+", help="reconstructed hsi files")
    p.add_argument("--ref", nargs="+", help="reference hsi files, same order")
    p.add_argument("--out", help="metrics CSV (default metrics.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle-check", parents=[common], help="run the tiny-instance operator oracles")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("report", parents=[common], help="per-band PSNR and loss curves as CSV")
    p.add_argument("--x", nargs="+", help="reconstructed hsi files")
    p.add_argument("--ref", nargs="+", help="reference hsi files, same order")
    p.add_argument("--train-log", dest="train_log", help="train_log.csv from train")
    p.add_argument("--trace", help="trace.csv from solve")
    p.add_argument("--plot", action="store_true", help="also render PNG plots (needs matplotlib)")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    try:
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        prox.set_threads(args.threads)
        if args.command in ("train", "reconstruct"):
            import torch

            torch.set_num_threads(args.threads)
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, DegenerateInputError, ResourceLimitError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
