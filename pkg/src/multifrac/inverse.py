r"""Recovering the fractional orders from a single interior observation.

Two order sets ``alpha`` and ``alpha~`` with the same weights are separated
in the Laplace domain by

.. math::

    w(x; s) = \frac{s\,(\hat u(x; s) - \hat{\tilde u}(x; s))}
                   {\sum_j |s^{\alpha_j} - s^{\tilde\alpha_j}|},

whose limit as ``s -> 0+`` is the solution :math:`w_0` of
:math:`(\mathcal{A} - b) w_0 = q_{j_0} a`, where ``j0`` is the last index
with :math:`\alpha_{j_0} \ne \tilde\alpha_{j_0}` (roles arranged so that
:math:`\alpha_{j_0} < \tilde\alpha_{j_0}`).  For ``a`` of one sign ``w_0`` has
that sign in the whole interior, so the observations must differ.

:func:`estimate_orders` is a practical least-squares estimator built on top
of the Laplace forward solver.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy import special as sc

from .asymptotics import fit_decay, stationary_profile
from .errors import DegenerateOrdersError, DomainError, SpecError, TailError, NonIdentificationWarning
from .problem import Discretization, OrderSet
from .solvers import ContourSpec, invert_laplace, laplace_transform

log = logging.getLogger(__name__)


# {{{ observations


@dataclass(frozen=True)
class Observation:
    """Samples ``u(x0, t_k)``; ``times`` may start at 0 (then ``values[0] = a(x0)``)."""

    x0: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise DomainError("observation times and values must be 1D arrays of equal length >= 2")
        if t[0] < 0.0 or np.any(np.diff(t) <= 0.0):
            raise DomainError("observation times must be non-negative and increasing")
        if not np.all(np.isfinite(v)):
            raise DomainError("observation values must be finite")


@dataclass(frozen=True)
class PowerTail:
    """Tail model ``c t^{-p}`` beyond the last observation time."""

    c: float
    p: float
    residual: float = 0.0

    def laplace(self, s: float, T: float) -> float:
        r"""``int_T^inf c t^{-p} e^{-st} dt = c s^{p-1} Gamma(1-p) Q(1-p, sT)``."""
        return self.c * s ** (self.p - 1.0) * math.gamma(1.0 - self.p) * float(sc.gammaincc(1.0 - self.p, s * T))


def fit_tail(obs: Observation, fraction: float = 0.1, max_residual: float = 0.02) -> PowerTail:
    """Fit ``c t^{-p}`` to the samples in ``[(1 - fraction) T, T]`` in log-log coordinates.

    :raises TailError: if the fit residual exceeds *max_residual*, the data are
        not positive, or the exponent is outside ``(0, 1)``.
    """
    T = float(obs.times[-1])
    lo = max(T * (1.0 - fraction), float(obs.times[obs.times > 0][0]))
    try:
        fit = fit_decay(obs.times, obs.values, (lo, T))
    except DomainError as exc:
        raise TailError(f"cannot fit a power-law tail: {exc}") from exc
    p = -fit.slope
    if fit.residual > max_residual or not 0.0 < p < 1.0:
        raise TailError(f"power-law tail rejected: exponent {p:.4g}, residual {fit.residual:.3g}")
    return PowerTail(math.exp(fit.intercept), p, fit.residual)


def observation_laplace(
    obs: Observation,
    s,
    tail: str | PowerTail | Callable[[float], float] = "auto",
    max_residual: float = 0.02,
) -> np.ndarray:
    r"""Laplace transform of the observation at real ``s > 0``.

    The data are interpolated linearly (and extended by the first value down
    to ``t = 0`` if needed) and integrated against ``e^{-st}`` exactly.

    :arg tail: ``"auto"`` fits :class:`PowerTail` to the end of the record,
        ``"none"`` drops the tail, a :class:`PowerTail` is used as given and a
        callable ``tail(s)`` returns the tail contribution directly.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr <= 0.0) or not np.all(np.isfinite(s_arr)):
        raise DomainError("the Laplace variable must be positive")

    t, f = obs.times, obs.values
    if t[0] > 0.0:
        t = np.concatenate([[0.0], t])
        f = np.concatenate([[f[0]], f])
    h = np.diff(t)
    df = np.diff(f)

    if isinstance(tail, str):
        if tail == "auto":
            tail = fit_tail(obs, max_residual=max_residual)
        elif tail == "none":
            tail = None
        else:
            raise DomainError(f"unknown tail mode {tail!r}")

    out = np.empty(s_arr.size)
    for k, sk in enumerate(s_arr):
        x = sk * h
        E = np.exp(-sk * t[:-1])
        # int_0^h (f_i + df_i tau/h) e^{-s (t_i + tau)} dtau
        m0 = -np.expm1(-x) / sk
        m1 = sc.gammainc(2.0, x) / (sk * sk)
        val = float(np.sum(E * (f[:-1] * m0 + df / h * m1)))
        if isinstance(tail, PowerTail):
            val += tail.laplace(sk, float(t[-1]))
        elif tail is not None:
            val += float(tail(sk))
        out[k] = val
    return out if np.ndim(s) else out[0]


# }}}


# {{{ discriminator


def _arrange(orders_a: Sequence[float], orders_b: Sequence[float]):
    """Return ``(a, b, j0, swapped)`` with ``a[j0] < b[j0]`` at the last differing index."""
    a = np.asarray(tuple(orders_a), dtype=float)
    b = np.asarray(tuple(orders_b), dtype=float)
    if a.shape != b.shape:
        raise SpecError("order sets must have the same length")
    diff = np.flatnonzero(a != b)
    if diff.size == 0:
        raise DegenerateOrdersError(f"order sets coincide: {tuple(a)}")
    j0 = int(diff[-1])
    swapped = bool(a[j0] > b[j0])
    if swapped:
        a, b = b, a
    return a, b, j0, swapped


def a_coefficients(orders_a, orders_b, s: float) -> np.ndarray:
    r"""``A_j(s) = (s^{alpha_j} - s^{alpha~_j}) / sum_k |s^{alpha_k} - s^{alpha~_k}|``.

    Roles are arranged so that ``alpha_{j0} < alpha~_{j0}``.
    """
    a, b, _, _ = _arrange(orders_a, orders_b)
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1): got {s}")
    d = s**a - s**b
    return d / np.sum(np.abs(d))


def q1_weight(orders_a, orders_b, q_at_x: Sequence[float], s: float) -> float:
    r"""``Q_1(x; s) = sum_j q_j(x) A_j(s)``; tends to ``q_{j0}(x)`` as ``s -> 0+``."""
    q = np.asarray(q_at_x, dtype=float)
    A = a_coefficients(orders_a, orders_b, s)
    if q.shape != A.shape:
        raise SpecError(f"{q.size} weights for {A.size} orders")
    return float(q @ A)


def reference_w0(disc: Discretization, j0: int) -> np.ndarray:
    """Solution of ``(A_h - b) w0 = q_{j0} a`` with Dirichlet data."""
    if np.any(disc.b > 0.0):
        raise SpecError("the reference problem needs b <= 0")
    return stationary_profile(disc, disc.q[j0] * disc.a)


@dataclass(frozen=True)
class DiscriminatorTrace:
    s_values: np.ndarray
    w_values: np.ndarray
    q1_values: np.ndarray
    j0: int
    w0: float
    """Reference limit ``w0(x0)``."""

    @property
    def limit(self) -> float:
        """Value at the smallest ``s``."""
        return float(self.w_values[-1])

    @property
    def relative_gap(self) -> float:
        return abs(abs(self.limit) - abs(self.w0)) / abs(self.w0) if self.w0 else math.inf


def point_sampler(disc: Discretization, x0: float) -> Callable[[np.ndarray], np.ndarray]:
    """Linear interpolation at *x0* along the last axis (zero boundary values)."""
    lo, hi = disc.spec.domain
    if not lo < x0 < hi:
        raise DomainError(f"x0 = {x0} must lie strictly inside {disc.spec.domain}")
    x = np.concatenate([[lo], disc.grid.nodes, [hi]])
    k = int(np.clip(np.searchsorted(x, x0, side="right") - 1, 0, x.size - 2))
    th = (x0 - x[k]) / (x[k + 1] - x[k])
    # indices into the interior arrays; boundary neighbours contribute zero
    pairs = [(k - 1, 1.0 - th), (k, th)]
    pairs = [(i, w) for i, w in pairs if 0 <= i < disc.n and w != 0.0]

    def sample(v):
        v = np.asarray(v)
        return sum(w * v[..., i] for i, w in pairs)

    return sample


def discriminator(
    disc: Discretization,
    orders_a,
    orders_b,
    x0: float,
    s_grid=None,
    observations: tuple[Observation, Observation] | None = None,
) -> DiscriminatorTrace:
    r"""Trace of ``w(x0; s)`` along decreasing ``s``.

    Without *observations* the transforms come from exact Laplace-domain
    solves (verification mode); otherwise from :func:`observation_laplace`
    applied to the two records.
    """
    a_ord, b_ord, j0, swapped = _arrange(orders_a, orders_b)
    s_grid = 10.0 ** -np.arange(1, 9, dtype=float) if s_grid is None else np.asarray(s_grid, float)
    if np.any(s_grid <= 0.0) or np.any(s_grid >= 1.0) or np.any(np.diff(s_grid) >= 0.0):
        raise DomainError("s_grid must be strictly decreasing in (0, 1)")
    at_x0 = point_sampler(disc, x0)
    q_x0 = at_x0(disc.q)

    if observations is None:
        ua = at_x0(laplace_transform(disc, s_grid, alphas=a_ord).real)
        ub = at_x0(laplace_transform(disc, s_grid, alphas=b_ord).real)
    else:
        obs_a, obs_b = observations[::-1] if swapped else observations
        ua = observation_laplace(obs_a, s_grid)
        ub = observation_laplace(obs_b, s_grid)

    denom = np.array([np.sum(np.abs(s**a_ord - s**b_ord)) for s in s_grid])
    w = s_grid * (ua - ub) / denom
    q1 = np.array([q1_weight(a_ord, b_ord, q_x0, s) for s in s_grid])
    w0 = float(at_x0(reference_w0(disc, j0)))
    return DiscriminatorTrace(s_grid, w, q1, j0, w0)


# }}}


# {{{ estimator


def _to_orders(p: np.ndarray) -> np.ndarray:
    """``alpha_1 = sigma(p_1)``, ``alpha_{j+1} = alpha_j sigma(p_{j+1})``."""
    sig = sc.expit(p)
    return np.cumprod(sig)


def _from_orders(alphas: Sequence[float]) -> np.ndarray:
    a = np.asarray(alphas, dtype=float)
    ratios = np.concatenate([[a[0]], a[1:] / a[:-1]])
    return sc.logit(ratios)


def point_forward_model(disc: Discretization, x0: float, times, tol: float = 1.0e-10):
    """Return ``alphas -> u(x0, times)`` computed by Laplace inversion."""
    at_x0 = point_sampler(disc, x0)
    times = np.asarray(times, dtype=float)

    def model(alphas) -> np.ndarray:
        contour = ContourSpec.default(alphas, times, tol)
        s, _ = contour.nodes()
        uhat = at_x0(laplace_transform(disc, s, alphas=alphas))
        return invert_laplace(contour, uhat, times, tol)

    return model


@dataclass
class EstimateResult:
    orders: OrderSet
    misfit: float
    """Relative RMS misfit ``||model - data|| / ||data||``."""
    nfev: int
    identified: bool
    trace: DiscriminatorTrace | None
    diagnostics: dict = field(default_factory=dict)


def estimate_orders(
    disc: Discretization,
    obs: Observation,
    init: Sequence[float],
    misfit_tol: float = 1.0e-3,
    tol: float = 1.0e-10,
    max_nfev: int = 200,
) -> EstimateResult:
    """Least-squares fit of the orders to the record ``obs``.

    The weights, coefficients and initial data are taken from *disc*; only
    the orders vary.  Iterates stay strictly decreasing in ``(0, 1)`` through
    the logistic parametrization of :func:`_to_orders`.

    Emits :class:`NonIdentificationWarning` when the final misfit stays above
    *misfit_tol*.
    """
    init = OrderSet(tuple(init)).alphas
    if len(init) != len(disc.spec.orders):
        raise SpecError(f"{len(init)} initial orders for {len(disc.spec.orders)} weights")
    disc.require_no_convection()

    mask = obs.times > 0.0
    times, data = obs.times[mask], obs.values[mask]
    model = point_forward_model(disc, obs.x0, times, tol)
    scale = float(np.linalg.norm(data))

    def residual(p):
        return (model(_to_orders(p)) - data) / scale

    sol = optimize.least_squares(
        residual, _from_orders(init), method="trf", x_scale=1.0, xtol=1e-12, ftol=1e-14, gtol=1e-14,
        max_nfev=max_nfev, diff_step=1e-6,
    )
    alphas = _to_orders(sol.x)
    misfit = float(np.linalg.norm(sol.fun))
    identified = misfit <= misfit_tol
    if not identified:
        warnings.warn(
            f"order estimate {tuple(np.round(alphas, 4))} stopped at misfit {misfit:.3e} > {misfit_tol:.1e}",
            NonIdentificationWarning,
            stacklevel=2,
        )

    fixed_sign = bool(np.all(disc.a >= 0.0) or np.all(disc.a <= 0.0)) and bool(np.any(disc.a != 0.0))
    trace = None
    # orders closer than this give a 0/0 discriminator
    if np.any(np.abs(alphas - np.asarray(init)) > 1.0e-8):
        try:
            trace = discriminator(disc, alphas, init, obs.x0)
        except (DegenerateOrdersError, SpecError, DomainError) as exc:
            log.info("no discriminator trace: %s", exc)

    diagnostics = {
        "initial_data_fixed_sign": fixed_sign,
        "optimizer_status": int(sol.status),
        "optimizer_message": str(sol.message),
    }
    if not fixed_sign:
        diagnostics["warning"] = "initial data change sign; uniqueness hypotheses do not hold"
    return EstimateResult(OrderSet(tuple(float(a) for a in alphas)), misfit, int(sol.nfev), identified, trace, diagnostics)


# }}}
