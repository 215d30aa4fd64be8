r"""Forward solvers for the multi-term time-fractional diffusion problem.

Three independent routes are provided:

* :func:`picard_solve` iterates the mild-solution integral equation written
  in the eigenbasis of ``A_h``;
* :func:`l1_solve` is an implicit L1 time stepper on (graded) meshes;
* :func:`laplace_solve` inverts the Laplace transform along two rays
  ``arg s = +-theta``.

With ``alpha = alpha_1`` the integral equation reads, mode by mode,

.. math::

    u(t) = S(t) a + \int_0^t K(t-r) F[u](r)\,dr
         + \sum_{j \ge 2} \Big( R_j(t) (q_j a)
         - \int_0^t R_j'(t-r) (q_j u)(r)\,dr \Big),

where :math:`F[u] = B u_x + b u`, :math:`K(\tau) = \tau^{\alpha-1}
E_{\alpha,\alpha}(-\lambda\tau^\alpha)`, :math:`R_j(\tau) = \tau^{\alpha-\alpha_j}
E_{\alpha,\alpha-\alpha_j+1}(-\lambda\tau^\alpha)` and :math:`R_j'` is its
derivative.  All three kernels have the form :math:`\tau^{\beta-1}
E_{\alpha,\beta}(-\lambda\tau^\alpha)`, whose first two primitives are again
Mittag-Leffler functions; the time integrals are done by product
integration against the piecewise-linear interpolant of the density.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContourResolutionError, DomainError, NonConvergenceError, NumericError
from .fractional import TimeGrid, default_grading, l1_weights
from .operator import EigenBasis, l2_norm, solve_shifted, solve_tridiagonal
from .problem import Discretization
from .special import mlf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Field:
    """Solution samples ``values[i, k] = u(x_i, t_k)`` at interior nodes."""

    values: np.ndarray
    nodes: np.ndarray
    times: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.nodes.size, self.times.size):
            raise DomainError(
                f"field shape {self.values.shape} does not match "
                f"{self.nodes.size} nodes x {self.times.size} times"
            )
        if not np.all(np.isfinite(self.values)):
            raise NumericError("field contains non-finite values")

    @property
    def snapshots(self) -> np.ndarray:
        """Time-major view, shape ``(n_times, n_nodes)``."""
        return self.values.T

    def with_boundary(self, domain: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and values including the two (zero) boundary rows."""
        x = np.concatenate([[domain[0]], self.nodes, [domain[1]]])
        z = np.zeros((1, self.times.size))
        return x, np.concatenate([z, self.values, z])

    def at(self, indices) -> Field:
        idx = np.asarray(indices)
        return Field(self.values[:, idx], self.nodes, self.times[idx])


def _field(disc: Discretization, snapshots: np.ndarray, times: np.ndarray) -> Field:
    return Field(np.ascontiguousarray(np.asarray(snapshots).T), disc.grid.nodes, np.asarray(times, float))


def default_time_grid(alphas, T: float, K: int) -> TimeGrid:
    """Graded grid with exponent ``(2 - alpha_min)/alpha_1``, capped at 4."""
    alphas = tuple(alphas)
    r = min(max((2.0 - alphas[-1]) / alphas[0], 1.0), 4.0)
    return TimeGrid.graded(T, K, r)


# {{{ spectral solution of the single-term problem


def spectral_single_term(basis: EigenBasis, alpha1: float, a: np.ndarray, times) -> np.ndarray:
    r"""Exact semi-discrete solution ``S(t) a`` of the single-term problem.

    :returns: snapshots of shape ``(len(times), n)``.
    """
    if not 0.0 < alpha1 < 1.0:
        raise DomainError(f"alpha1 must lie in (0, 1): got {alpha1}")
    t = np.asarray(times, dtype=float)
    if np.any(t < 0.0):
        raise DomainError("times must be non-negative")
    c = basis.coefficients(a)
    E = mlf(alpha1, 1.0, -np.outer(t**alpha1, basis.values))
    return basis.synthesize(E * c)


def spectral_field(disc: Discretization, times) -> Field:
    """:func:`spectral_single_term` for a discretized single-term problem."""
    spec = disc.spec
    if len(spec.orders) != 1 or disc.has_potential or disc.has_convection:
        raise DomainError("the spectral solution needs one order, b = 0 and B = 0")
    return _field(disc, spectral_single_term(disc.basis, spec.orders.alpha1, disc.a, times), times)


# }}}


# {{{ L1 time stepping


def l1_solve(disc: Discretization, grid: TimeGrid, a: np.ndarray | None = None) -> Field:
    r"""Implicit multi-term L1 scheme.

    At step ``m`` the tridiagonal system
    ``(sum_j q_j c_j + A_h - b - B d_x) u^m = history`` is solved, where
    ``c_j`` is the leading L1 weight for ``alpha_j``.
    """
    a = disc.a if a is None else np.asarray(a, dtype=float)
    alphas = disc.spec.orders.alphas
    K = grid.K
    C = [l1_weights(al, grid) for al in alphas]

    u = np.zeros((K + 1, disc.n))
    u[0] = a
    du = np.zeros((K, disc.n))

    lower = disc.offdiag - disc.conv_lower
    upper = disc.offdiag - disc.conv_upper
    for m in range(1, K + 1):
        lead = sum(disc.q[j] * C[j][m, m - 1] for j in range(len(alphas)))
        rhs = np.zeros(disc.n)
        for j in range(len(alphas)):
            hist = C[j][m, : m - 1] @ du[: m - 1] if m > 1 else 0.0
            rhs += disc.q[j] * (C[j][m, m - 1] * u[m - 1] - hist)
        diag = disc.diag - disc.b + lead
        u[m] = solve_tridiagonal(lower, diag[None, :], upper, rhs[None, :])[0]
        du[m - 1] = u[m] - u[m - 1]

    if not np.all(np.isfinite(u)):
        raise NumericError("L1 stepping produced non-finite values")
    return _field(disc, u, grid.times)


# }}}


# {{{ Laplace inversion


@dataclass(frozen=True)
class ContourSpec:
    r"""Two rays ``s = r e^{+-i theta}`` with trapezoidal nodes in ``log r``.

    ``r`` runs over ``[r_min, r_max]`` with spacing ``step`` in ``log r``.
    """

    theta: float
    r_min: float
    r_max: float
    step: float

    def __post_init__(self) -> None:
        if not math.pi / 2 < self.theta < math.pi:
            raise DomainError(f"theta must lie in (pi/2, pi): got {self.theta}")
        if not 0.0 < self.r_min < self.r_max < math.inf:
            raise DomainError(f"need 0 < r_min < r_max < inf: {self.r_min}, {self.r_max}")
        if self.m < 8:
            raise DomainError(f"at least 8 nodes per ray are required: m = {self.m}")

    @property
    def m(self) -> int:
        return int(math.ceil(math.log(self.r_max / self.r_min) / self.step)) + 1

    @classmethod
    def default(
        cls, alphas, times, tol: float = 1.0e-12, theta: float | None = None
    ) -> ContourSpec:
        """Contour resolving all *times* to about *tol*.

        * ``theta`` defaults to the midpoint of ``(pi/2, min(pi/(2 alpha_1), pi))``;
        * ``r_max`` makes ``exp(r_max t_min cos theta)`` negligible;
        * ``r_min`` makes the neglected ``int_0^r_min`` (of size
          ``r_min^alpha_min``) negligible;
        * ``step`` follows from the width of the strip of analyticity in ``log r``.
        """
        alphas = tuple(alphas)
        t = np.asarray(times, dtype=float)
        if np.any(t <= 0.0):
            raise DomainError("Laplace inversion needs positive times")
        upper = min(math.pi / (2.0 * alphas[0]), math.pi)
        if theta is None:
            theta = 0.5 * (math.pi / 2 + upper)
        if not math.pi / 2 < theta < upper:
            raise DomainError(f"theta must lie in (pi/2, {upper:.6g}): got {theta}")
        L = math.log(1.0 / tol)
        r_max = (L + 5.0) / (abs(math.cos(theta)) * float(t.min()))
        r_min = min(tol ** (1.0 / alphas[-1]), 1.0e-3 / float(t.max()))
        d = 0.5 * min(theta - math.pi / 2, math.pi - theta)
        step = 2.0 * math.pi * d / (L + 2.0)
        return cls(theta, r_min, r_max, step)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        r"""Nodes ``s_k`` on both rays and weights ``w_k`` with
        ``(1/2 pi i) int f(s) e^{st} ds ~ sum_k w_k f(s_k) e^{s_k t}``."""
        x = math.log(self.r_min) + self.step * np.arange(self.m)
        r = np.exp(x)
        e = np.exp(1j * self.theta)
        s = np.concatenate([r * e, r * np.conj(e)])
        # ds = e^{i theta} r dx on the upper ray; the lower ray runs inwards
        w = np.concatenate([r * e, -r * np.conj(e)]) * self.step / (2j * math.pi)
        return s, w

    def min_time(self, tol: float = 1.0e-12) -> float:
        """Smallest time for which truncation at ``r_max`` stays below *tol*."""
        return math.log(1.0 / tol) / (abs(math.cos(self.theta)) * self.r_max)


def invert_laplace(
    contour: ContourSpec, transform: np.ndarray, times, tol: float = 1.0e-12, check: float = 1.0e-8
) -> np.ndarray:
    """Evaluate the inverse transform at *times* from samples at ``contour.nodes()``.

    :arg transform: shape ``(2 m, ...)``, ordered like the nodes.
    :returns: real array ``(len(times), ...)``.
    :raises ContourResolutionError: if a time is below the truncation bound
        or the imaginary residue exceeds *check*.
    """
    t = np.asarray(times, dtype=float)
    tmin = contour.min_time(tol)
    if np.any(t < tmin * (1.0 - 1.0e-12)):
        raise ContourResolutionError(
            f"time {t.min():.3e} below the resolution bound {tmin:.3e} of r_max = {contour.r_max:.3e}"
        )
    s, w = contour.nodes()
    transform = np.asarray(transform)
    flat = transform.reshape(transform.shape[0], -1)
    # chunk over times to bound the size of the exponential matrix
    out = np.empty((t.size, flat.shape[1]), dtype=complex)
    for lo in range(0, t.size, 64):
        E = w[None, :] * np.exp(np.outer(t[lo : lo + 64], s))
        out[lo : lo + 64] = E @ flat
    scale = max(1.0, float(np.max(np.abs(out.real), initial=0.0)))
    resid = float(np.max(np.abs(out.imag), initial=0.0))
    if resid > check * scale:
        raise ContourResolutionError(f"imaginary residue {resid:.3e} exceeds {check:.1e}")
    return out.real.reshape((t.size,) + transform.shape[1:])


def laplace_transform(disc: Discretization, s: np.ndarray, a: np.ndarray | None = None, weights=None, alphas=None):
    r"""``u^(s) = (A_h - b + Q(s))^{-1} s^{-1} Q(s) a`` for every *s*, shape ``(len(s), n)``."""
    a = disc.a if a is None else np.asarray(a, dtype=float)
    q = disc.q if weights is None else np.atleast_2d(weights)
    al = np.asarray(disc.spec.orders.alphas if alphas is None else alphas, dtype=float)
    s = np.asarray(s, dtype=complex)
    Q = (s[:, None] ** al[None, :]) @ q
    return solve_shifted(disc, s, Q * a[None, :] / s[:, None], weights=q, alphas=al)


def laplace_solve(
    disc: Discretization,
    times,
    contour: ContourSpec | None = None,
    a: np.ndarray | None = None,
    tol: float = 1.0e-12,
) -> Field:
    """Solve by numerical inversion of the Laplace transform (``B = 0`` required)."""
    disc.require_no_convection()
    times = np.asarray(times, dtype=float)
    if contour is None:
        contour = ContourSpec.default(disc.spec.orders.alphas, times, tol)
    s, _ = contour.nodes()
    uhat = laplace_transform(disc, s, a)
    return _field(disc, invert_laplace(contour, uhat, times, tol), times)


# }}}


# {{{ integral equation


def _primitives(alpha: float, beta: float, lam: np.ndarray, tau: np.ndarray):
    r"""First and second primitives of ``tau^{beta-1} E_{alpha,beta}(-lam tau^alpha)``.

    :returns: two arrays of shape ``tau.shape + lam.shape``.
    """
    tau = np.asarray(tau, dtype=float)
    ta = tau[..., None] ** alpha
    z = -ta * lam
    K1 = tau[..., None] ** beta * mlf(alpha, beta + 1.0, z)
    K2 = tau[..., None] ** (beta + 1.0) * mlf(alpha, beta + 2.0, z)
    return K1, K2


def convolution_weights(alpha: float, beta: float, lam: np.ndarray, t: np.ndarray, rows=None) -> np.ndarray:
    r"""Product-integration weights for ``int_0^{t_m} k(t_m - r) g(r) dr``.

    ``k(tau) = tau^{beta-1} E_{alpha,beta}(-lam tau^alpha)`` and ``g`` is
    piecewise linear on *t*.  Returns ``W`` of shape ``(len(rows), K+1, n)``
    with the integral equal to ``sum_i W[m, i, n] g[i, n]``.
    """
    t = np.asarray(t, dtype=float)
    K = t.size - 1
    rows = np.arange(K + 1) if rows is None else np.asarray(rows)
    h = np.diff(t)
    W = np.zeros((rows.size, K + 1, lam.size))
    for r, m in enumerate(rows):
        if m == 0:
            continue
        tau = t[m] - t[: m + 1]  # tau[i] = t_m - t_i, decreasing to 0
        K1, K2 = _primitives(alpha, beta, lam, tau)
        K1[m] = 0.0
        K2[m] = 0.0
        # segment i: a = tau[i+1], b = tau[i]
        dK1 = K1[:m] - K1[1 : m + 1]
        M = (K2[:m] - K2[1 : m + 1] - h[:m, None] * K1[1 : m + 1]) / h[:m, None]
        W[r, :m] += dK1 - M
        W[r, 1 : m + 1] += M
    return W


@dataclass
class MildSolutionMap:
    r"""Right-hand side of the integral equation on a fixed time grid.

    Precomputes all product-integration weights so that one application costs
    a few dense contractions.
    """

    disc: Discretization
    t: np.ndarray
    a: np.ndarray
    source: np.ndarray = field(init=False)
    _W_F: np.ndarray | None = field(init=False, default=None)
    _W_R: list = field(init=False, default_factory=list)

    def __post_init__(self) -> None:
        disc, t = self.disc, np.asarray(self.t, dtype=float)
        self.t = t
        if t[0] != 0.0 or np.any(np.diff(t) <= 0.0):
            raise DomainError("the integral equation needs an increasing grid starting at 0")
        basis = disc.basis
        lam = basis.values
        alphas = disc.spec.orders.alphas
        al = alphas[0]

        # S(t) a and R_j(t) (q_j a)
        ac = basis.coefficients(self.a)
        ta = -np.outer(t**al, lam)
        src = mlf(al, 1.0, ta) * ac
        for j in range(1, len(alphas)):
            aj = alphas[j]
            qa = basis.coefficients(disc.q[j] * self.a)
            src += (t ** (al - aj))[:, None] * mlf(al, al - aj + 1.0, ta) * qa
        self.source = src

        if disc.has_potential or disc.has_convection:
            self._W_F = convolution_weights(al, al, lam, t)
        self._W_R = [convolution_weights(al, al - alphas[j], lam, t) for j in range(1, len(alphas))]

    def apply_modal(self, c: np.ndarray) -> np.ndarray:
        """Map modal coefficients ``c[k, n]`` of ``u(t_k)`` to those of the right-hand side."""
        disc = self.disc
        basis = disc.basis
        u = basis.synthesize(c)
        out = self.source.copy()
        if self._W_F is not None:
            g = basis.coefficients(disc.apply_lower_order(u))
            out += np.einsum("min,in->mn", self._W_F, g)
        for j, W in enumerate(self._W_R, start=1):
            g = basis.coefficients(disc.q[j] * u)
            out -= np.einsum("min,in->mn", W, g)
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite value in the integral-equation map")
        return out


@dataclass
class PicardState:
    """Iterate ``u_n`` (modal coefficients) and successive-difference norms."""

    n: int
    coeffs: np.ndarray
    history: list = field(default_factory=list)
    converged: bool = False


def weighted_norm(basis: EigenBasis, t: np.ndarray, alpha1: float, gamma: float, dc: np.ndarray) -> float:
    r"""``sup_t t^{alpha_1 gamma} ||v(t)||_{D(A^gamma)}`` for modal coefficients *dc*."""
    nrm = np.sqrt(np.sum(basis.values ** (2.0 * gamma) * dc**2, axis=-1))
    return float(np.max(t ** (alpha1 * gamma) * nrm))


def picard_step(state: PicardState, mapping: MildSolutionMap, gamma: float = 0.5, tol: float = 1e-6) -> PicardState:
    """One Picard iteration ``u_{n+1} = Phi(u_n)``."""
    new = mapping.apply_modal(state.coeffs)
    d = weighted_norm(
        mapping.disc.basis, mapping.t, mapping.disc.spec.orders.alpha1, gamma, new - state.coeffs
    )
    return PicardState(state.n + 1, new, state.history + [d], d <= tol)


def picard_solve(
    disc: Discretization,
    grid: TimeGrid,
    gamma: float = 0.5,
    tol: float = 1.0e-6,
    max_iter: int = 30,
    a: np.ndarray | None = None,
) -> tuple[Field, PicardState]:
    """Picard iteration for the mild solution, starting from ``u_0 = 0``.

    :raises NonConvergenceError: when ``max_iter`` iterations do not reach *tol*.
    """
    if not 0.5 <= gamma < 1.0:
        raise DomainError(f"gamma must lie in [1/2, 1): got {gamma}")
    a = disc.a if a is None else np.asarray(a, dtype=float)
    mapping = MildSolutionMap(disc, grid.times, a)
    state = PicardState(0, np.zeros((grid.times.size, disc.n)))
    while not state.converged:
        if state.n >= max_iter:
            raise NonConvergenceError(
                f"Picard iteration did not reach {tol:.1e} in {max_iter} steps", state.history
            )
        state = picard_step(state, mapping, gamma, tol)
        log.debug("picard iteration %d: d = %.3e", state.n, state.history[-1])
    return _field(disc, disc.basis.synthesize(state.coeffs), grid.times), state


def integral_equation_residual(u: Field, disc: Discretization, max_nodes: int = 257) -> float:
    r"""``max_t ||u(t) - Phi[u](t)|| / max_t ||u(t)||`` in the discrete L2 norm.

    Grids longer than *max_nodes* are subsampled (keeping the first and last
    node) so that the weight tensor stays small.
    """
    t = u.times
    if t[0] != 0.0:
        raise DomainError("the residual needs the field at t = 0")
    idx = np.arange(t.size)
    if t.size > max_nodes:
        stride = int(math.ceil((t.size - 1) / (max_nodes - 1)))
        idx = np.unique(np.concatenate([idx[::stride], [t.size - 1]]))
    snaps = u.snapshots[idx]
    mapping = MildSolutionMap(disc, t[idx], snaps[0])
    c = disc.basis.coefficients(snaps)
    r = disc.basis.synthesize(mapping.apply_modal(c)) - snaps
    return float(np.max(l2_norm(disc.h, r)) / np.max(l2_norm(disc.h, snaps)))


# }}}
