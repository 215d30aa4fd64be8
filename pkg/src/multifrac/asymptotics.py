r"""Long-time behaviour of the multi-term problem.

For ``b <= 0``, ``q_j >= 0`` and no convection, the solution decays like the
solution ``v`` of the single-term problem carrying only the smallest order,

.. math::

    q_\ell(x) \partial_t^{\alpha_\ell} v = -\mathcal{A} v + b v,

and both behave like :math:`u_\ell(t) = (\mathcal{A} - b)^{-1}(q_\ell a)\,
t^{-\alpha_\ell}/\Gamma(1-\alpha_\ell)` for large ``t``.  All large-time fields
are computed by Laplace inversion on a single contour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .operator import h2_norm, l2_norm, solve_tridiagonal
from .problem import Discretization
from .solvers import ContourSpec, Field, _field, invert_laplace, laplace_transform


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line ``log norm = intercept + slope log t``."""

    slope: float
    intercept: float
    fit_window: tuple[float, float]
    residual: float
    """RMS of the log-log residuals."""


def fit_decay(times, norms, window: tuple[float, float] | None = None) -> DecayFit:
    """Fit a power law to *norms* over *window* (default: the last decade of *times*)."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if window is None:
        window = (float(t.max()) / 10.0, float(t.max()))
    lo, hi = window
    if not 0.0 < lo < hi:
        raise DomainError(f"invalid fit window {window}")
    mask = (t >= lo * (1.0 - 1.0e-12)) & (t <= hi * (1.0 + 1.0e-12))
    if mask.sum() < 8:
        raise DomainError(f"need at least 8 samples in the window, got {mask.sum()}")
    if np.any(y[mask] <= 0.0) or not np.all(np.isfinite(y[mask])):
        raise DomainError("norms must be positive and finite on the fit window")

    X = np.log(t[mask])
    Y = np.log(y[mask])
    A = np.stack([X, np.ones_like(X)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = float(np.sqrt(np.mean((A @ np.array([slope, intercept]) - Y) ** 2)))
    return DecayFit(float(slope), float(intercept), (float(lo), float(hi)), res)


def _require_hypotheses(disc: Discretization) -> None:
    disc.require_no_convection()
    disc.require_sign_hypotheses()


def _single_term_data(disc: Discretization):
    return disc.q[-1:], (disc.spec.orders.smallest,)


def single_term_reference(
    disc: Discretization, times, contour: ContourSpec | None = None, tol: float = 1.0e-12
) -> Field:
    """Solution ``v`` of the single-term problem with weight ``q_l`` and order ``alpha_l``."""
    _require_hypotheses(disc)
    times = np.asarray(times, dtype=float)
    if contour is None:
        contour = ContourSpec.default(disc.spec.orders.alphas, times, tol)
    s, _ = contour.nodes()
    q, al = _single_term_data(disc)
    vhat = laplace_transform(disc, s, weights=q, alphas=al)
    return _field(disc, invert_laplace(contour, vhat, times, tol), times)


def stationary_profile(disc: Discretization, rhs: np.ndarray) -> np.ndarray:
    """Solve the real Dirichlet problem ``(A_h - b) w = rhs``."""
    diag = (disc.diag - disc.b)[None, :]
    return solve_tridiagonal(disc.offdiag, diag, disc.offdiag, np.asarray(rhs, dtype=float)[None, :])[0]


def leading_term(disc: Discretization, t) -> np.ndarray:
    r"""``u_l(t) = (A - b)^{-1}(q_l a) t^{-alpha_l} / Gamma(1 - alpha_l)``.

    Scalar *t* gives an array of shape ``(n,)``; an array gives ``(len(t), n)``.
    """
    if np.any(disc.b > 0.0):
        raise DomainError("the leading term needs b <= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise DomainError("t must be positive")
    al = disc.spec.orders.smallest
    w = stationary_profile(disc, disc.q[-1] * disc.a)
    scale = t ** (-al) / math.gamma(1.0 - al)
    return np.multiply.outer(scale, w)


@dataclass(frozen=True)
class AsymptoticsReport:
    times: np.ndarray
    norm_u: np.ndarray
    """``||u(t)||_{L2}``."""
    norm_u_minus_v: np.ndarray
    """Discrete H2 norm of ``u - v``."""
    norm_u_minus_ul: np.ndarray
    """Discrete H2 norm of ``u - u_l``."""
    fit_u: DecayFit
    fit_u_minus_v: DecayFit
    fit_u_minus_ul: DecayFit
    target_rate: float
    """``min(2 alpha_l, alpha_{l-1})`` (``inf`` for a single order)."""
    passed: bool


def verify_theorem_asymp(
    disc: Discretization,
    times,
    window: tuple[float, float] | None = None,
    tol: float = 1.0e-12,
    slope_slack: float = 0.05,
    rate_slack: float = 0.1,
) -> AsymptoticsReport:
    """Compute ``u``, ``v`` and ``u_l`` at large *times* and fit their decay.

    Passes when the ``||u||`` slope is ``-alpha_l +- slope_slack`` and both
    difference slopes are at most ``-min(2 alpha_l, alpha_{l-1}) + rate_slack``.
    """
    _require_hypotheses(disc)
    times = np.asarray(times, dtype=float)
    if times.min() <= 0.0 or times.max() / times.min() < 100.0:
        raise DomainError("times must be positive and span at least two decades")

    alphas = disc.spec.orders.alphas
    contour = ContourSpec.default(alphas, times, tol)
    s, _ = contour.nodes()
    uhat = laplace_transform(disc, s)
    q, al = _single_term_data(disc)
    vhat = laplace_transform(disc, s, weights=q, alphas=al)
    u = invert_laplace(contour, uhat, times, tol)
    d_uv = invert_laplace(contour, uhat - vhat, times, tol)
    ul = leading_term(disc, times)

    norm_u = l2_norm(disc.h, u)
    n_uv = h2_norm(disc, d_uv)
    n_ul = h2_norm(disc, u - ul)

    fit_u = fit_decay(times, norm_u, window)
    ell = len(alphas)
    target = min(2.0 * alphas[-1], alphas[-2]) if ell > 1 else math.inf

    if ell > 1:
        fit_uv = fit_decay(times, n_uv, window)
    else:
        # u = v: the difference is pure roundoff and carries no rate
        fit_uv = DecayFit(-math.inf, -math.inf, fit_u.fit_window, 0.0)
    fit_ul = fit_decay(times, n_ul, window)

    ok = abs(fit_u.slope + alphas[-1]) <= slope_slack
    if ell > 1:
        ok = ok and fit_uv.slope <= -target + rate_slack and fit_ul.slope <= -target + rate_slack
    return AsymptoticsReport(times, norm_u, n_uv, n_ul, fit_u, fit_uv, fit_ul, target, bool(ok))
