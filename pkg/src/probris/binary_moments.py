"""Closed-form moments of quadratic forms in independent +/-1 vectors.

Every function takes the mean vector ``y = E[x] = 2p - 1`` of a random
vector ``x`` in ``{-1, +1}^N`` with independent (not identically
distributed) entries, and returns an exact expectation or its gradient with
respect to ``y``.  Results hold on the closed box ``[-1, 1]^N``; at a vertex
they reduce to evaluating the polynomial at ``x = y``.

Notation: ``H = G_wd`` is ``G`` with its diagonal zeroed, ``d = y * y``,
``t = Tr(G)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError
from .reformulation import SYMMETRY_TOL, check_symmetric

BOX_TOL = 1e-12


def strip_diag(G) -> np.ndarray:
    """Copy of ``G`` with the diagonal set to zero."""
    G = np.array(G, dtype=float, copy=True)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {G.shape}")
    np.fill_diagonal(G, 0.0)
    return G


def _check_y(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DomainError(f"y must be a vector, got shape {y.shape}")
    if n is not None and y.size != n:
        raise DomainError(f"dimension mismatch: y has {y.size} entries, expected {n}")
    if np.any(np.abs(y) > 1.0 + BOX_TOL):
        raise DomainError("y must lie in [-1, 1]^N")
    return y


def _check_z(z, n: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (n,):
        raise DomainError(f"dimension mismatch: z has shape {z.shape}, expected ({n},)")
    return z


@dataclass(frozen=True)
class QuadForm:
    """Symmetric matrix ``G`` with the ``y``-independent pieces cached.

    The moment functions accept either a raw array or a ``QuadForm``; solvers
    that evaluate the same ``G`` at many points should pass the latter.
    """

    G: np.ndarray

    def __post_init__(self):
        G = check_symmetric(self.G, SYMMETRY_TOL, name="G").copy()
        G.setflags(write=False)
        object.__setattr__(self, "G", G)

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @cached_property
    def H(self) -> np.ndarray:
        return strip_diag(self.G)

    @cached_property
    def diag(self) -> np.ndarray:
        return np.diag(self.G).copy()

    @cached_property
    def trace(self) -> float:
        return float(np.trace(self.G))

    @cached_property
    def Z(self) -> np.ndarray:
        return self.H @ self.H.T

    @cached_property
    def Z_wd(self) -> np.ndarray:
        return strip_diag(self.Z)

    @cached_property
    def G_s(self) -> np.ndarray:
        return 2.0 * self.trace * self.H + 4.0 * self.Z_wd

    @cached_property
    def G_g(self) -> np.ndarray:
        return 2.0 * self.H * self.H

    @cached_property
    def H_sq(self) -> np.ndarray:
        return self.H * self.H


def as_quadform(G) -> QuadForm:
    return G if isinstance(G, QuadForm) else QuadForm(G)


def covariance(y) -> np.ndarray:
    """Second-moment matrix ``E[x x^T] = (y y^T) * E_m + I``."""
    y = _check_y(y)
    C = np.outer(y, y)
    np.fill_diagonal(C, 1.0)
    return C


def mean_qf(G, z, y) -> float:
    """``E[x^T G x + z^T x] = y^T H y + Tr(G) + z^T y``."""
    qf = as_quadform(G)
    y = _check_y(y, qf.n)
    z = _check_z(z, qf.n)
    return float(y @ qf.H @ y + qf.trace + z @ y)


def grad_qf(G, z, y) -> np.ndarray:
    """Gradient of :func:`mean_qf` in ``y``: ``2 H y + z``."""
    qf = as_quadform(G)
    y = _check_y(y, qf.n)
    z = _check_z(z, qf.n)
    return 2.0 * (qf.H @ y) + z


def mean_ql(G, z, y) -> float:
    """``E[(x^T G x)(z^T x)]``.

    Three groups of index coincidences contribute: ``2 y^T H z``,
    ``(z^T y) Tr(G)``, and the all-distinct triple sum
    ``1^T {(H Y_wd) * Y_wd} (y * z)`` with ``Y = y 1^T``.  The last term is
    evaluated in O(N^2) as ``sum_k y_k z_k (y^T H y - 2 y_k (H y)_k)``.
    """
    qf = as_quadform(G)
    y = _check_y(y, qf.n)
    z = _check_z(z, qf.n)
    H = qf.H
    a = H @ y
    q = y @ a
    w = y * z
    triple = q * w.sum() - 2.0 * np.dot(w * y, a)
    return float(2.0 * (y @ H @ z) + (z @ y) * qf.trace + triple)


def _gt_matrix(H: np.ndarray, y: np.ndarray) -> np.ndarray:
    # G_T = H diag(y) E_m, formed without the O(N^3) product
    return (H @ y)[:, None] - H * y[None, :]


def grad_ql(G, z, y) -> np.ndarray:
    """Gradient of :func:`mean_ql` in ``y``.

    ``2 H z + z Tr(G) + ((G_T^T * E_m) y) * z + diag(G_T diag(y*z) E_m)
    + (G_T * E_m)(y * z)`` with ``G_T = H T_0`` and ``T_0 = diag(y) E_m``.
    """
    qf = as_quadform(G)
    y = _check_y(y, qf.n)
    z = _check_z(z, qf.n)
    H = qf.H
    GT = _gt_matrix(H, y)
    GT_hollow = strip_diag(GT)
    w = y * z
    term3 = (GT_hollow.T @ y) * z
    term4 = GT @ w - np.diag(GT) * w
    term5 = GT_hollow @ w
    return 2.0 * (H @ z) + z * qf.trace + term3 + term4 + term5


def block_matrix_b(G) -> np.ndarray:
    """Literal ``N^2 x N`` block matrix ``B`` (small ``N`` only).

    Block ``(k, j)`` is the column ``b_{k,j}`` with ``b_{k,j}[i] = H[i, j] H[k, i]``,
    stored at rows ``k*N : (k+1)*N`` of column ``j``.
    """
    H = as_quadform(G).H
    n = H.shape[0]
    # B3[k, i, j] = H[k, i] * H[i, j]
    B3 = H[:, :, None] * H[None, :, :]
    return B3.reshape(n * n, n)


def u_matrix(G, y, *, literal: bool = False) -> np.ndarray:
    """``U = [I_N kron (y*y)^T] B``.

    Entry ``U[k, j] = sum_i d_i H[i, j] H[k, i]``, i.e. ``H diag(d) H``; the
    literal route builds ``B`` and is kept to validate the shortcut.
    """
    qf = as_quadform(G)
    y = _check_y(y, qf.n)
    d = y * y
    n = qf.n
    if literal:
        return np.kron(np.eye(n), d[None, :]) @ block_matrix_b(qf)
    return (qf.H * d[None, :]) @ qf.H


def mean_qs(G, y) -> float:
    """Second moment ``E[(x^T G x)^2]``.

    ``y^T (G_s - F(y)) y + Tr(G)^2 + 2 Tr(Z) + (y^T G y)^2 - d^T G_g d`` with
    ``Z = H H^T``, ``G_s = 2 Tr(G) H + 4 Z_wd``, ``G_g = 2 H * H`` and
    ``F(y) = (d^T diag(G)) (G + H) + 4 U_wd``.
    """
    qf = as_quadform(G)
    y = _check_y(y, qf.n)
    d = y * y
    U_wd = strip_diag(u_matrix(qf, y))
    F = (d @ qf.diag) * (qf.G + qf.H) + 4.0 * U_wd
    yGy = y @ qf.G @ y
    return float(
        y @ (qf.G_s - F) @ y
        + qf.trace**2
        + 2.0 * np.trace(qf.Z)
        + yGy**2
        - d @ qf.G_g @ d
    )


def b_s_vector(G, y) -> np.ndarray:
    """Entry ``i`` is ``y^T B_t[i] y - y^T diag(B_t[i]) y``.

    ``B_t[i]`` is the outer product of column ``i`` and row ``i`` of ``H``.
    The diagonal correction carries the weights ``d = y*y``: it removes the
    ``j == k`` terms of ``sum_{j != k} y_j y_k H[j, i] H[i, k]``.
    """
    qf = as_quadform(G)
    y = _check_y(y, qf.n)
    a = qf.H @ y
    return a * a - qf.H_sq.T @ (y * y)


def grad_qs(G, y) -> np.ndarray:
    """Gradient of :func:`mean_qs` in ``y``."""
    qf = as_quadform(G)
    y = _check_y(y, qf.n)
    G_, H, g = qf.G, qf.H, qf.diag
    d = y * y
    U_wd = strip_diag(u_matrix(qf, y))
    GpH = G_ + H
    yGy = y @ G_ @ y
    dg = d @ g
    Gs, Gg = qf.G_s, qf.G_g
    return (
        (Gs + Gs.T) @ y
        + 2.0 * yGy * ((G_ + G_.T) @ y)
        - 2.0 * (y @ GpH @ y) * (g * y)
        - dg * (GpH @ y)
        - dg * (GpH.T @ y)
        - 2.0 * ((Gg + Gg.T) @ d) * y
        - 8.0 * y * b_s_vector(qf, y)
        - 4.0 * ((U_wd + U_wd.T) @ y)
    )
