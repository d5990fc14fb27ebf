"""Tiny-instance reference checks for the matrix-free operators.

Every check compares the fast path against something built independently:
an inner-product identity, a dense matrix assembled entry by entry, or
central finite differences. ``run_all`` is what ``lrsci oracle-check`` runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cassi
from .lowrank import (
    build_explicit_phi_A,
    build_explicit_phi_E,
    compose,
    forward_lowrank,
    grad_basis,
    grad_subspace,
    vec_basis,
    vec_subspace,
)


@dataclass
class OracleResult:
    name: str
    error: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(self.error <= self.tol)

    def __str__(self):
        flag = "ok" if self.ok else "FAIL"
        return f"{flag:4s} {self.name}: error {self.error:.3e} (tol {self.tol:.0e})"


def random_spec(H, W, B, step, rng) -> cassi.SensingSpec:
    return cassi.SensingSpec(rng.random((H, W)), bands=B, step=step)


def adjoint_dot_test(spec, trials=100, seed=0) -> float:
    """Worst ``|<Phi x, y> - <x, Phi^T y>| / (||x|| ||y||)`` over random pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(spec.cube_shape)
        y = rng.standard_normal(spec.meas_shape)
        lhs = np.vdot(cassi.forward(x, spec), y)
        rhs = np.vdot(x, cassi.adjoint(y, spec))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(x) * np.linalg.norm(y)))
    return float(worst)


def explicit_matrix_error(spec, trials=5, seed=0) -> float:
    """Max deviation of forward/adjoint from the dense sensing matrix."""
    rng = np.random.default_rng(seed)
    phi = cassi.build_explicit_sensing_matrix(spec)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(spec.cube_shape)
        y = rng.standard_normal(spec.meas_shape)
        worst = max(
            worst,
            np.abs(cassi.forward(x, spec).ravel() - phi @ cassi.vec_cube(x)).max(),
            np.abs(cassi.vec_cube(cassi.adjoint(y, spec)) - phi.T @ y.ravel()).max(),
        )
    return float(worst)


def kronecker_error(spec, k, trials=20, seed=0) -> float:
    """Max deviation of the factored operators from ``Phi(I kron A)`` and ``Phi(E kron I)``."""
    rng = np.random.default_rng(seed)
    H, W, B = spec.cube_shape
    worst = 0.0
    for _ in range(trials):
        A = rng.standard_normal((H, W, k))
        E = rng.standard_normal((B, k))
        r = rng.standard_normal(spec.meas_shape)
        phi_a = build_explicit_phi_A(A, spec)
        phi_e = build_explicit_phi_E(E, spec)
        y = forward_lowrank(A, E, spec).ravel()
        worst = max(
            worst,
            np.abs(y - phi_a @ vec_basis(E)).max(),
            np.abs(y - phi_e @ vec_subspace(A)).max(),
            np.abs(vec_basis(grad_basis(r, A, spec)) - phi_a.T @ r.ravel()).max(),
            np.abs(vec_subspace(grad_subspace(r, E, spec)) - phi_e.T @ r.ravel()).max(),
        )
    return float(worst)


def _fd_directional(f, x, direction, h):
    return (f(x + h * direction) - f(x - h * direction)) / (2 * h)


def gradient_fd_error(spec, k, trials=5, h=1e-6, seed=0) -> float:
    """Relative error of the E/A gradients against central differences of ``0.5||r||^2``."""
    rng = np.random.default_rng(seed)
    H, W, B = spec.cube_shape
    worst = 0.0
    for _ in range(trials):
        A = rng.standard_normal((H, W, k))
        E = rng.standard_normal((B, k))
        y = rng.standard_normal(spec.meas_shape)
        obj_e = lambda V: 0.5 * np.sum((forward_lowrank(A, V, spec) - y) ** 2)
        obj_a = lambda V: 0.5 * np.sum((forward_lowrank(V, E, spec) - y) ** 2)
        r = forward_lowrank(A, E, spec) - y
        for obj, x, g in ((obj_e, E, grad_basis(r, A, spec)), (obj_a, A, grad_subspace(r, E, spec))):
            d = rng.standard_normal(x.shape)
            fd = _fd_directional(obj, x, d, h)
            an = float(np.vdot(g, d))
            worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    return float(worst)


def compose_error(seed=0) -> float:
    """``compose`` against an explicit mode-3 product loop."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 4, 2))
    E = rng.standard_normal((5, 2))
    ref = np.einsum("hwk,bk->hwb", A, E)
    return float(np.abs(compose(A, E) - ref).max())


def run_all(seed: int = 0) -> list[OracleResult]:
    rng = np.random.default_rng(seed)
    small = random_spec(16, 16, 8, 2, rng)
    tiny = random_spec(4, 3, 3, 1, rng)
    return [
        OracleResult("adjoint dot-test 16x16x8", adjoint_dot_test(small, 100, seed), 1e-10),
        OracleResult("explicit sensing matrix 4x3x3", explicit_matrix_error(tiny, 5, seed), 1e-12),
        OracleResult("compose vs einsum", compose_error(seed), 1e-12),
        OracleResult("kronecker operators k=2", kronecker_error(tiny, 2, 20, seed), 1e-10),
        OracleResult("finite-difference gradients", gradient_fd_error(tiny, 2, 5, 1e-6, seed), 1e-4),
    ]
