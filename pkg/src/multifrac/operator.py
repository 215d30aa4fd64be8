r"""Spectral calculus of the discrete elliptic operator.

The eigenvectors are normalized in the discrete inner product
:math:`(v, w)_h = h \sum_i v_i w_i`, so that fractional powers and the
solution operator :math:`S(z)` act diagonally on the coefficients
:math:`(v, \varphi_n)_h`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import DomainError, NumericError
from .problem import Discretization
from .special import ml_eval


@dataclass(frozen=True)
class EigenBasis:
    """Eigenpairs of ``A_h``, ascending, with ``h * phi.T @ phi = I``.

    ``vectors[:, n]`` is the n-th eigenvector sampled at the interior nodes.
    """

    values: np.ndarray
    vectors: np.ndarray
    h: float

    @property
    def size(self) -> int:
        return self.values.size

    def coefficients(self, v: np.ndarray) -> np.ndarray:
        """``(v, phi_n)_h`` along the last axis of *v*."""
        return self.h * (np.asarray(v) @ self.vectors)

    def synthesize(self, c: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`coefficients`."""
        return np.asarray(c) @ self.vectors.T


def inner(h: float, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Discrete L2 inner product along the last axis."""
    return h * np.sum(v * w, axis=-1)


def l2_norm(h: float, v: np.ndarray) -> np.ndarray:
    return np.sqrt(h * np.sum(np.abs(v) ** 2, axis=-1))


def h2_norm(disc: Discretization, v: np.ndarray) -> np.ndarray:
    """Discrete H2-type norm ``||A_h v|| + ||v||``."""
    return l2_norm(disc.h, disc.apply_A(np.asarray(v, dtype=float))) + l2_norm(disc.h, v)


def eigendecompose(disc: Discretization) -> EigenBasis:
    """Full eigendecomposition of the symmetric tridiagonal ``A_h``."""
    try:
        lam, vec = sla.eigh_tridiagonal(disc.diag, disc.offdiag)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"tridiagonal eigensolver failed for n={disc.n}: {exc}") from exc

    if lam[0] <= 0.0:
        raise NumericError(f"A_h is not positive definite: lambda_1 = {lam[0]:.3e}")

    vec = vec / np.sqrt(disc.h)
    # fix the sign so that each eigenvector starts positive
    vec *= np.where(vec[0] < 0.0, -1.0, 1.0)
    return EigenBasis(lam, vec, disc.h)


def frac_power_apply(basis: EigenBasis, gamma: float, v: np.ndarray) -> np.ndarray:
    """``A^gamma v`` for ``gamma`` in ``[-1, 1]``."""
    if not -1.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [-1, 1]: got {gamma}")
    v = np.asarray(v)
    if v.shape[-1] != basis.size:
        raise DomainError(f"vector length {v.shape[-1]} does not match basis size {basis.size}")
    return basis.synthesize(basis.values**gamma * basis.coefficients(v))


def sobolev_norm(basis: EigenBasis, gamma: float, v: np.ndarray) -> np.ndarray:
    """Norm of ``D(A^gamma)``: ``(sum_n lambda_n^(2 gamma) |(v, phi_n)|^2)^(1/2)``."""
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1]: got {gamma}")
    c = basis.coefficients(v)
    return np.sqrt(np.sum(basis.values ** (2.0 * gamma) * np.abs(c) ** 2, axis=-1))


def solution_operator_symbol(
    lam: np.ndarray, alpha1: float, deriv_order: int, z: complex
) -> np.ndarray:
    """Diagonal of ``S^{(j)}(z)`` in the eigenbasis."""
    if not 0.0 < alpha1 < 1.0:
        raise DomainError(f"alpha1 must lie in (0, 1): got {alpha1}")
    if deriv_order not in (0, 1, 2):
        raise DomainError(f"deriv_order must be 0, 1 or 2: got {deriv_order}")
    z = complex(z)
    if z == 0 or not abs(np.angle(z)) < np.pi / 2:
        raise DomainError(f"z must satisfy z != 0 and |arg z| < pi/2: got {z}")

    za = z**alpha1
    arg = -lam * za
    if deriv_order == 0:
        e, _, _ = ml_eval(alpha1, 1.0, arg)
        return e
    e, _, _ = ml_eval(alpha1, alpha1 - deriv_order + 1.0, arg)
    return -lam * z ** (alpha1 - deriv_order) * e


def solution_operator(
    basis: EigenBasis, alpha1: float, deriv_order: int, z: complex, v: np.ndarray
) -> np.ndarray:
    """Apply ``S(z)`` (``deriv_order`` 0) or its first/second derivative to *v*."""
    sym = solution_operator_symbol(basis.values, alpha1, deriv_order, z)
    out = basis.synthesize(sym * basis.coefficients(v))
    if np.isrealobj(v) and np.isreal(z):
        return out.real
    return out


def weight_symbol(disc: Discretization, s) -> np.ndarray:
    r"""``Q(x; s) = sum_j q_j(x) s^{alpha_j}`` for an array of *s*, shape ``(len(s), n)``."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    alphas = np.asarray(disc.spec.orders.alphas)
    return (s[:, None] ** alphas[None, :]) @ disc.q


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Batched Thomas algorithm.

    *diag* and *rhs* have shape ``(m, n)``; *lower* and *upper* have length
    ``n - 1`` (shared by the batch) or shape ``(m, n - 1)``.  No pivoting: the
    systems solved here are diagonally dominant.
    """
    diag = np.asarray(diag)
    rhs = np.asarray(rhs)
    m, n = diag.shape
    lower = np.broadcast_to(lower, (m, n - 1))
    upper = np.broadcast_to(upper, (m, n - 1))
    dtype = np.result_type(diag, rhs, lower, upper)

    cp = np.empty((m, n), dtype=dtype)
    dp = np.empty((m, n), dtype=dtype)
    cp[:, 0] = 0.0
    denom = diag[:, 0]
    if n > 1:
        cp[:, 0] = upper[:, 0] / denom
    dp[:, 0] = rhs[:, 0] / denom
    for i in range(1, n):
        denom = diag[:, i] - lower[:, i - 1] * cp[:, i - 1]
        if i < n - 1:
            cp[:, i] = upper[:, i] / denom
        dp[:, i] = (rhs[:, i] - lower[:, i - 1] * dp[:, i - 1]) / denom

    x = np.empty((m, n), dtype=dtype)
    x[:, -1] = dp[:, -1]
    for i in range(n - 2, -1, -1):
        x[:, i] = dp[:, i] - cp[:, i] * x[:, i + 1]
    return x


def solve_shifted(
    disc: Discretization, s, rhs, weights: np.ndarray | None = None, alphas=None
) -> np.ndarray:
    r"""Solve ``(A_h - B d_x - b + Q(x; s)) w = rhs`` for one or many *s*.

    :arg s: scalar or array of shape ``(m,)`` in the sector ``|arg s| < pi``.
    :arg rhs: shape ``(n,)`` or ``(m, n)``.
    :arg weights, alphas: replace ``q_j`` and ``alpha_j`` (used for the
        single-term comparison problems); default to the problem's own.
    """
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(s == 0) or not np.all(np.isfinite(s)):
        raise DomainError("s must be finite and non-zero")
    rhs = np.asarray(rhs, dtype=complex)
    if not np.all(np.isfinite(rhs)):
        raise DomainError("right-hand side must be finite")
    rhs = np.broadcast_to(rhs, (s.size, disc.n))

    q = disc.q if weights is None else np.atleast_2d(weights)
    al = np.asarray(disc.spec.orders.alphas if alphas is None else alphas, dtype=float)
    Q = (s[:, None] ** al[None, :]) @ q

    diag = disc.diag[None, :] - disc.b[None, :] + Q
    lower = disc.offdiag - disc.conv_lower
    upper = disc.offdiag - disc.conv_upper
    w = solve_tridiagonal(lower, diag, upper, rhs)
    if not np.all(np.isfinite(w)):
        raise NumericError("shifted solve produced non-finite values")
    return w[0] if scalar else w
