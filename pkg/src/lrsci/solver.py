"""Alternating proximal-gradient reconstruction on the basis/subspace models.

Each iteration takes a gradient step on ``E`` with ``A`` fixed, applies the
basis prox, then a gradient step on ``A`` with the new ``E`` and the subspace
prox.
"""

from __future__ import annotations

import contextlib
import csv
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cassi, prox
from .errors import DivergenceError
from .lowrank import compose, decompose_truncated_svd, grad_basis, grad_subspace, residual

log = logging.getLogger(__name__)

STEP_SAFETY = 0.9


@dataclass
class SolverConfig:
    k: int = 3
    max_iters: int = 500
    rho_e: float | str = "auto"
    rho_a: float | str = "auto"
    prox_e: str = "qr_orthonormalize"
    prox_a: str = "identity"
    lambda_e: float = 0.0
    lambda_a: float = 0.0
    tol: float = 1e-4
    seed: int = 0
    power_iters: int = 50
    tv_iters: int = 30

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("rank k must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        for name in ("rho_e", "rho_a"):
            value = getattr(self, name)
            if value != "auto" and not (isinstance(value, (int, float)) and value >= 0):
                raise ValueError(f"{name} must be 'auto' or a nonnegative number, got {value!r}")
        if self.lambda_e < 0 or self.lambda_a < 0:
            raise ValueError("prox strengths must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        self.prox_e = prox.resolve(self.prox_e)
        self.prox_a = prox.resolve(self.prox_a)


@dataclass
class IterRecord:
    iter: int
    objective: float
    rel_residual: float
    seconds: float


@dataclass
class SolveTrace:
    records: list = field(default_factory=list)
    degenerate_init: bool = False

    def __len__(self):
        return len(self.records)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    @property
    def rel_residuals(self) -> np.ndarray:
        return np.array([r.rel_residual for r in self.records])

    def to_csv(self, target, header_comment: str | None = None):
        """Write the trace to a path or an open text file."""
        with _open_text(target) as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iter", "objective", "rel_residual", "seconds"])
            for r in self.records:
                writer.writerow([r.iter, repr(r.objective), repr(r.rel_residual), f"{r.seconds:.6f}"])


@contextlib.contextmanager
def _open_text(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def init_classical(y, spec: cassi.SensingSpec, k: int):
    """Back-project, equalize band energies, and factor by truncated SVD.

    Returns ``(E0, A0, degenerate)``; ``degenerate`` is set for an all-zero
    measurement, in which case ``A0 = 0`` and ``E0`` is the first ``k``
    columns of the identity.
    """
    y = np.asarray(y, dtype=np.float64)
    H, W, B = spec.cube_shape
    if not 1 <= k <= B:
        raise ValueError(f"rank must satisfy 1 <= k <= B={B}, got {k}")
    if not np.any(y):
        warnings.warn("all-zero measurement: returning zero subspace images", RuntimeWarning, stacklevel=2)
        return np.eye(B, k), np.zeros((H, W, k)), True
    x0 = cassi.adjoint(y, spec)
    target = y.mean() / B
    band_means = x0.mean(axis=(0, 1))
    scale = np.divide(target, band_means, out=np.zeros(B), where=band_means != 0)
    E0, A0 = decompose_truncated_svd(x0 * scale, k)
    return E0, A0, False


def estimate_lipschitz(normal_op, shape, iters: int = 50, seed: int = 0) -> float:
    """Largest eigenvalue of a PSD operator by power iteration (Rayleigh quotient)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = normal_op(v)
        lam = float(np.vdot(v, w))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return max(lam, 0.0)


def lipschitz_basis(A, spec, iters=50, seed=0) -> float:
    """``||Phi_A||^2`` estimate for the E-problem."""
    op = lambda V: grad_basis(cassi.forward(compose(A, V), spec), A, spec)
    return estimate_lipschitz(op, (spec.bands, A.shape[-1]), iters, seed)


def lipschitz_subspace(E, spec, iters=50, seed=0) -> float:
    """``||Phi_E||^2`` estimate for the A-problem."""
    op = lambda V: grad_subspace(cassi.forward(compose(V, E), spec), E, spec)
    return estimate_lipschitz(op, (spec.height, spec.width, E.shape[-1]), iters, seed)


def gd_step_E(E, A, y, spec, rho_e):
    """``E - rho_e * Phi_A^T (Phi_A e - y)``."""
    return E - rho_e * grad_basis(residual(A, E, y, spec), A, spec)


def gd_step_A(A, E, y, spec, rho_a):
    """``A - rho_a * Phi_E^T (Phi_E a - y)``."""
    return A - rho_a * grad_subspace(residual(A, E, y, spec), E, spec)


def data_fidelity(A, E, y, spec) -> float:
    r = residual(A, E, y, spec)
    return 0.5 * float(np.vdot(r, r))


def _step(rho, lipschitz):
    if rho != "auto":
        return float(rho)
    L = lipschitz()
    return STEP_SAFETY / L if L > 0 else 0.0


def solve_alternating(y, spec: cassi.SensingSpec, cfg: SolverConfig):
    """Run the alternating PGD loop from :func:`init_classical`.

    Returns ``(E, A, cube, trace)``. Raises :class:`DivergenceError` carrying
    the trace if an iterate stops being finite.
    """
    y = np.asarray(y, dtype=np.float64)
    E, A, degenerate = init_classical(y, spec, cfg.k)
    trace = SolveTrace(degenerate_init=degenerate)
    y_norm = np.linalg.norm(y) or 1.0
    start = time.perf_counter()

    for it in range(1, cfg.max_iters + 1):
        rho_e = _step(cfg.rho_e, lambda: lipschitz_basis(A, spec, cfg.power_iters, cfg.seed + it))
        E = gd_step_E(E, A, y, spec, rho_e)
        if cfg.prox_e == "qr_orthonormalize":
            E, A = prox.prox_apply(cfg.prox_e, 0.0, E, partner=A)
        else:
            E = prox.prox_apply(cfg.prox_e, cfg.lambda_e * rho_e, E, tv_iters=cfg.tv_iters)

        rho_a = _step(cfg.rho_a, lambda: lipschitz_subspace(E, spec, cfg.power_iters, cfg.seed + it))
        A = gd_step_A(A, E, y, spec, rho_a)
        if cfg.prox_a == "qr_orthonormalize":
            raise ValueError("qr_orthonormalize applies to the spectral basis only")
        A = prox.prox_apply(cfg.prox_a, cfg.lambda_a * rho_a, A, tv_iters=cfg.tv_iters)

        r = residual(A, E, y, spec)
        rel = float(np.linalg.norm(r) / y_norm)
        trace.records.append(IterRecord(it, 0.5 * float(np.vdot(r, r)), rel, time.perf_counter() - start))
        if not (np.all(np.isfinite(E)) and np.all(np.isfinite(A)) and np.isfinite(rel)):
            raise DivergenceError(f"non-finite iterate at iteration {it}", trace)
        if rel < cfg.tol:
            log.debug("converged at iteration %d (rel residual %.3e)", it, rel)
            break

    return E, A, compose(A, E), trace


def config_summary(cfg: SolverConfig) -> str:
    return " ".join(f"{k}={v}" for k, v in asdict(cfg).items())
