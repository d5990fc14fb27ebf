"""Low-rank factorization ``X = A x_3 E`` and the basis/subspace sensing operators.

``E`` is a ``(..., B, k)`` spectral basis and ``A`` holds the subspace images as
``(..., H, W, k)``. With ``e = vec(E^T)`` and ``a = vec(A_mat)`` (``A_mat`` the
``HW x k`` unfolding, columns stacked) the sensing operators are

    Phi_A = Phi (I_B kron A_mat)      acting on e
    Phi_E = Phi (E kron I_HW)         acting on a

Neither is materialized outside the ``build_explicit_*`` oracles. All
matrix-free functions accept numpy arrays or torch tensors.
"""

from __future__ import annotations

import numpy as np

from . import cassi
from .errors import DegenerateInputError, ResourceLimitError

ORACLE_MAX_ENTRIES = 1_000_000


def _check_rank(A, E):
    if A.ndim < 3 or E.ndim < 2:
        raise ValueError(f"expected A as (..., H, W, k) and E as (..., B, k), got {tuple(A.shape)}, {tuple(E.shape)}")
    if A.shape[-1] != E.shape[-1]:
        raise ValueError(f"rank mismatch: A has {A.shape[-1]} channels, E has {E.shape[-1]} columns")


def compose(A, E):
    """Cube ``X`` with ``X[h, w, b] = sum_j A[h, w, j] * E[b, j]``."""
    _check_rank(A, E)
    return A @ E[..., None, :, :].mT


def decompose_truncated_svd(x: np.ndarray, k: int):
    """Best rank-``k`` factorization of a cube.

    Returns ``(E, A)`` with ``E`` the top-``k`` left singular vectors of the
    ``B x HW`` unfolding and ``A = X_mat E`` so that ``compose(A, E)`` is the
    Eckart-Young approximation. Column signs are fixed so the entry of largest
    magnitude in each column of ``E`` is positive.
    """
    x = np.asarray(x, dtype=np.float64)
    H, W, B = x.shape
    if int(k) != k or not 1 <= k <= B:
        raise ValueError(f"rank must satisfy 1 <= k <= B={B}, got {k}")
    unfolded = x.reshape(H * W, B).T
    U, _, _ = np.linalg.svd(unfolded, full_matrices=False)
    E = U[:, :k]
    pivot = np.argmax(np.abs(E), axis=0)
    signs = np.sign(E[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    E = E * signs
    A = (unfolded.T @ E).reshape(H, W, k)
    return E, A


def forward_lowrank(A, E, spec: cassi.SensingSpec):
    """``Phi vec(A E^T)``; equals ``Phi_A e`` and ``Phi_E a``."""
    return cassi.forward(compose(A, E), spec)


def residual(A, E, y, spec: cassi.SensingSpec):
    """``Phi vec(A E^T) - y``."""
    return forward_lowrank(A, E, spec) - y


def grad_basis(r, A, spec: cassi.SensingSpec):
    """``Phi_A^T r`` as a ``(..., B, k)`` matrix (``Z^T A_mat``)."""
    Z = cassi.adjoint(r, spec)
    if A.shape[-3:-1] != Z.shape[-3:-1]:
        raise ValueError(f"subspace images {tuple(A.shape)} do not match spatial size {spec.cube_shape[:2]}")
    H, W, B = spec.cube_shape
    Zm = Z.reshape(*Z.shape[:-3], H * W, B)
    Am = A.reshape(*A.shape[:-3], H * W, A.shape[-1])
    return Zm.mT @ Am


def grad_subspace(r, E, spec: cassi.SensingSpec):
    """``Phi_E^T r`` as ``(..., H, W, k)`` subspace images (``Z E``)."""
    Z = cassi.adjoint(r, spec)
    if E.shape[-2] != spec.bands:
        raise ValueError(f"basis has {E.shape[-2]} rows, sensing spec has {spec.bands} bands")
    return Z @ E[..., None, :, :]


def vec_basis(E: np.ndarray) -> np.ndarray:
    """``e = vec(E^T)``: rows of ``E`` concatenated."""
    return np.ascontiguousarray(E).ravel()


def vec_subspace(A: np.ndarray) -> np.ndarray:
    """``a = vec(A_mat)``: columns of the ``HW x k`` unfolding concatenated."""
    H, W, k = A.shape
    return A.reshape(H * W, k).ravel(order="F")


def unvec_subspace(a: np.ndarray, shape) -> np.ndarray:
    H, W, k = shape
    return np.asarray(a).reshape(H * W, k, order="F").reshape(H, W, k)


def _oracle_guard(rows, cols):
    if rows * cols > ORACLE_MAX_ENTRIES:
        raise ResourceLimitError(f"explicit operator of {rows}x{cols} exceeds {ORACLE_MAX_ENTRIES} entries")


def build_explicit_phi_A(A: np.ndarray, spec: cassi.SensingSpec) -> np.ndarray:
    """Dense ``Phi (I_B kron A_mat)``."""
    H, W, B = spec.cube_shape
    k = A.shape[-1]
    _oracle_guard(H * spec.out_width, B * k)
    phi = cassi.build_explicit_sensing_matrix(spec)
    return phi @ np.kron(np.eye(B), A.reshape(H * W, k))


def build_explicit_phi_E(E: np.ndarray, spec: cassi.SensingSpec) -> np.ndarray:
    """Dense ``Phi (E kron I_HW)``."""
    H, W, B = spec.cube_shape
    k = E.shape[-1]
    _oracle_guard(H * spec.out_width, H * W * k)
    phi = cassi.build_explicit_sensing_matrix(spec)
    return phi @ np.kron(E, np.eye(H * W))


def renormalize(E: np.ndarray, A: np.ndarray, rtol: float = 1e-12):
    """Orthonormalize ``E`` by QR while keeping ``A E^T`` unchanged.

    ``E = Q R`` with ``diag(R) > 0``; returns ``(Q, A R^T)``.
    """
    Q, R = np.linalg.qr(E)
    diag = np.diag(R)
    scale = np.abs(diag).max() if diag.size else 0.0
    if scale == 0.0 or np.abs(diag).min() <= rtol * scale:
        raise DegenerateInputError("spectral basis is rank deficient; cannot orthonormalize")
    signs = np.sign(diag)
    Q = Q * signs
    R = R * signs[:, None]
    return Q, A @ R.T


def unknown_count(H: int, W: int, B: int, k: int) -> tuple[int, int]:
    """``(k*(B + H*W), H*W*B)``: unknowns of the factorized vs. full problem."""
    return k * (B + H * W), H * W * B
