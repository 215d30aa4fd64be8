r"""Gamma and two-parameter Mittag-Leffler functions.

The Mittag-Leffler function

.. math::

    E_{\alpha,\beta}(z) = \sum_{k=0}^\infty \frac{z^k}{\Gamma(\alpha k + \beta)}

is evaluated with one of three algorithms depending on where :math:`z` lies:

* a truncated Taylor series for small :math:`|z|`,
* the Poincaré expansion (with its exponential terms) for large :math:`|z|`,
* a Hankel-type contour integral of :math:`e^s s^{\alpha-\beta}/(s^\alpha - z)`
  along a parabola in between, plus the residues of the poles left outside
  the parabola.

Everything is vectorized over :math:`z`; :func:`mittag_leffler` is the scalar
front end that also reports an error estimate and the branch used.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special as sc

from .errors import AccuracyError, DomainError

EPS = float(np.finfo(float).eps)

# branch switch points in terms of x = |z|**(1/alpha)
_X_TAYLOR_MAX = 14.0
_X_ASYMPTOTIC_MIN = 2.0
# candidate vertices of the integration parabola
_PARABOLA_MU = (0.5, 1.0, 2.0, 4.0, 8.0)
_CHUNK = 4096
_X_BINS = (0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 11.0, 16.0, 24.0, 32.0, 64.0, 128.0, np.inf)


class Branch(enum.IntEnum):
    TAYLOR = 0
    ASYMPTOTIC = 1
    INTEGRAL = 2


@dataclass(frozen=True)
class MLParams:
    """Parameters of :math:`E_{\\alpha,\\beta}`.

    ``beta`` may be any real number: :math:`E_{\\alpha,\\alpha-1}` shows up in
    second time derivatives of the relaxation function.
    """

    alpha: float
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 2.0:
            raise DomainError(f"alpha must lie in (0, 2): got {self.alpha}")
        if not math.isfinite(self.beta):
            raise DomainError(f"beta must be finite: got {self.beta}")


@dataclass(frozen=True)
class EvalResult:
    value: complex
    est_error: float
    """Heuristic error estimate (last-term size or roundoff bound), not a bound."""
    branch: Branch


def gamma(x: float) -> float:
    """Gamma function for real, non-pole arguments."""
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise DomainError(f"gamma has a pole at {x}")
    return float(sc.gamma(x))


# {{{ branches


def _taylor_terms(alpha: float, beta: float, r: float) -> int:
    """Number of series terms needed for ``|z| <= r``."""
    if r == 0.0:
        return 1
    logr = math.log(r)
    k = 1
    peaked = False
    while k < 5000:
        arg = alpha * k + beta
        if arg > 0:
            # log of |z|^k / Gamma(alpha k + beta), Stirling-safe via lgamma
            logterm = k * logr - math.lgamma(arg)
            if peaked and logterm < math.log(EPS) - 8.0:
                return k
            if arg > 1.0 and alpha * math.log(arg) > logr:
                peaked = True
        k += 1
    return k


def _taylor(alpha: float, beta: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    K = _taylor_terms(alpha, beta, float(np.abs(z).max(initial=0.0)))
    c = sc.rgamma(alpha * np.arange(K + 1) + beta)

    az = np.abs(z)
    value = np.full(z.shape, c[K], dtype=complex)
    absum = np.full(z.shape, abs(c[K]))
    for k in range(K - 1, -1, -1):
        value = value * z + c[k]
        absum = absum * az + abs(c[k])

    tail = np.abs(c[K]) * az**K
    return value, 4.0 * EPS * absum + tail


def _exponential_part(alpha: float, beta: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum of the residues ``(1/alpha) s^(1-beta) e^s`` at all poles on the main sheet."""
    x = np.abs(z) ** (1.0 / alpha)
    logx = np.log(np.where(x > 0, x, 1.0))
    argz = np.angle(z)

    total = np.zeros(z.shape, dtype=complex)
    for m in (-1, 0, 1):
        theta = (argz + 2.0 * np.pi * m) / alpha
        mask = np.abs(theta) <= np.pi * (1.0 + 1.0e-14)
        if not mask.any():
            continue
        # a pole on the cut is reached from both sides: count each side half
        weight = np.where(np.abs(np.abs(theta[mask]) - np.pi) <= 1.0e-14 * np.pi, 0.5, 1.0)
        s = x[mask] * np.exp(1j * theta[mask])
        total[mask] += weight * np.exp((1.0 - beta) * (logx[mask] + 1j * theta[mask]) + s) / alpha

    return total, np.abs(total)


def _asymptotic(alpha: float, beta: float, z: np.ndarray, kmax: int = 400) -> tuple[np.ndarray, np.ndarray]:
    expo, expo_abs = _exponential_part(alpha, beta, z)

    # Terms are -z^-k / Gamma(beta - alpha k).  Truncation is driven by the
    # envelope |z|^-k Gamma(alpha k + 1 - beta) / pi, which bounds the terms
    # without the oscillating sine factor of the reflection formula.
    logabs = np.log(np.abs(z))
    zinv = 1.0 / z
    power = np.ones_like(z)
    algebraic = np.zeros_like(z)
    absum = np.zeros(z.shape)
    prev_env = np.full(z.shape, np.inf)
    omitted = np.zeros(z.shape)
    active = np.ones(z.shape, dtype=bool)

    # for alpha = 1 and integer beta the series terminates
    terminating = alpha == 1.0 and beta == round(beta)
    if terminating:
        kmax = max(int(round(beta)) - 1, 0)

    for k in range(1, kmax + 1):
        power = power * zinv
        g = beta - alpha * k
        c = float(sc.rgamma(g))
        if 1.0 - g > 0.0:
            env = np.exp(math.lgamma(1.0 - g) - math.log(math.pi) - k * logabs)
        else:
            env = abs(c) * np.exp(-k * logabs)
        env = np.maximum(env, abs(c) * np.abs(power))

        # optimal truncation: stop once the envelope grows again
        grow = active & (env > prev_env)
        omitted[grow] = env[grow]
        active &= ~grow
        if not active.any():
            break

        term = -c * power
        algebraic[active] += term[active]
        absum[active] += np.abs(term[active])
        prev_env = env

        done = active & (env <= EPS * 1.0e-3 * np.maximum(np.abs(algebraic + expo), 1e-300))
        omitted[done] = env[done]
        active &= ~done
        if not active.any():
            break

    omitted = np.where(active, 0.0 if terminating else prev_env, omitted)
    err = omitted + 4.0 * EPS * (absum + expo_abs)
    return expo + algebraic, err


def _parabola_distance(alpha: float, z: np.ndarray, mu: float) -> np.ndarray:
    """Distance (in the parameter plane) between the parabola nodes and the poles."""
    d = np.ones(z.shape)
    x = np.abs(z) ** (1.0 / alpha)
    argz = np.angle(z)
    for m in (-1, 0, 1):
        theta = (argz + 2.0 * np.pi * m) / alpha
        mask = np.abs(theta) < np.pi
        c = np.sqrt(x) * np.cos(theta / 2.0) / math.sqrt(mu)
        d = np.where(mask, np.minimum(d, np.abs(1.0 - c)), d)
    return d


def _integral(alpha: float, beta: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    value = np.zeros(z.shape, dtype=complex)
    err = np.zeros(z.shape)
    if z.size == 0:
        return value, err

    # pick, for every z, the smallest vertex keeping the poles away from the nodes
    dist = np.stack([_parabola_distance(alpha, z, mu) for mu in _PARABOLA_MU])
    good = dist >= 0.5
    choice = np.where(good.any(axis=0), good.argmax(axis=0), dist.argmax(axis=0))
    dchosen = np.minimum(dist[choice, np.arange(z.size)], 0.5)
    # bucket the distances so that each group shares one set of nodes
    dbucket = np.maximum(np.floor(dchosen * 20.0) / 20.0, 0.05)

    x = np.abs(z) ** (1.0 / alpha)
    argz = np.angle(z)
    for imu, mu in enumerate(_PARABOLA_MU):
        for d in np.unique(dbucket[choice == imu]):
            idx = np.flatnonzero((choice == imu) & (dbucket == d))
            h = 2.0 * np.pi * d / (mu * (1.0 + d) ** 2 + 38.0)
            umax = math.sqrt(1.0 + 40.0 / mu)
            n = int(math.ceil(umax / h))
            real = not np.any(z[idx].imag)
            # for real z the integrand is conjugate symmetric in u
            u = h * (np.arange(0, n + 1) if real else np.arange(-n, n + 1))
            w = 1.0 + 1j * u
            s = mu * w * w
            # weights of the trapezoidal rule for (1/2 pi i) int f(s) ds
            coef = (h * mu / np.pi) * w * np.exp(s) * s ** (alpha - beta)
            if real:
                coef[1:] *= 2.0
            sa = s**alpha

            for lo in range(0, idx.size, _CHUNK):
                sub = idx[lo : lo + _CHUNK]
                terms = coef[None, :] / (sa[None, :] - z[sub, None])
                total = terms.sum(axis=1)
                value[sub] = total.real if real else total
                err[sub] = 8.0 * EPS * np.abs(terms).sum(axis=1)

            # residues of poles lying to the right of the parabola
            for m in (-1, 0, 1):
                theta = (argz[idx] + 2.0 * np.pi * m) / alpha
                c = np.sqrt(x[idx]) * np.cos(theta / 2.0)
                mask = (np.abs(theta) < np.pi) & (c > math.sqrt(mu))
                if mask.any():
                    sub = idx[mask]
                    th = theta[mask]
                    sstar = x[sub] * np.exp(1j * th)
                    res = np.exp((1.0 - beta) * (np.log(x[sub]) + 1j * th) + sstar) / alpha
                    value[sub] += res
                    err[sub] += 4.0 * EPS * np.abs(res)

    return value, err


# }}}


def ml_eval(
    alpha: float, beta: float, z, tol: float = 1.0e-14, method: Branch | str | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized evaluation of :math:`E_{\\alpha,\\beta}(z)`.

    :arg tol: a Taylor or asymptotic value is accepted when its error estimate
        is below ``tol * max(1, |E|)``; otherwise the contour integral is used.
    :arg method: force one branch (used to compare branches with each other).
    :returns: ``(values, error estimates, branch codes)``, shaped like *z*.
        Values beyond the double range (``E`` grows like ``exp(|z|^(1/alpha))``
        near the positive axis) are returned as ``inf`` with error ``inf``.
    """
    MLParams(alpha, beta)
    with np.errstate(over="ignore", invalid="ignore"):
        value, err, branch = _ml_eval(alpha, beta, z, tol, method)
    bad = ~np.isfinite(value)
    if bad.any():
        value[bad] = np.inf
        err[bad] = np.inf
    return value, err, branch


def _ml_eval(alpha, beta, z, tol, method):
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()

    value = np.zeros(z.shape, dtype=complex)
    err = np.zeros(z.shape)
    branch = np.full(z.shape, -1, dtype=np.int8)

    if method is not None:
        method = Branch[method.upper()] if isinstance(method, str) else Branch(method)
        fn = {Branch.TAYLOR: _taylor, Branch.ASYMPTOTIC: _asymptotic, Branch.INTEGRAL: _integral}[method]
        value, err = fn(alpha, beta, z)
        branch[:] = method
        return value.reshape(shape), err.reshape(shape), branch.reshape(shape)

    zero = z == 0
    value[zero] = sc.rgamma(beta)
    branch[zero] = Branch.TAYLOR
    todo = ~zero

    x = np.abs(z) ** (1.0 / alpha)

    for br, fn, cand in (
        (Branch.TAYLOR, _taylor, x <= _X_TAYLOR_MAX),
        (Branch.ASYMPTOTIC, _asymptotic, x >= _X_ASYMPTOTIC_MIN),
    ):
        # bins of similar |z| keep the number of series terms per batch small
        for lo, hi in zip(_X_BINS[:-1], _X_BINS[1:]):
            idx = np.flatnonzero(todo & cand & (x >= lo) & (x < hi))
            if idx.size == 0:
                continue
            v, e = fn(alpha, beta, z[idx])
            with np.errstate(invalid="ignore"):
                ok = e <= tol * np.maximum(1.0, np.abs(v))
            value[idx[ok]] = v[ok]
            err[idx[ok]] = e[ok]
            branch[idx[ok]] = br
            todo[idx[ok]] = False

    idx = np.flatnonzero(todo)
    if idx.size:
        v, e = _integral(alpha, beta, z[idx])
        value[idx] = v
        err[idx] = e
        branch[idx] = Branch.INTEGRAL

    return value.reshape(shape), err.reshape(shape), branch.reshape(shape)


def mlf(alpha: float, beta: float, x) -> np.ndarray:
    """Real-valued :math:`E_{\\alpha,\\beta}(x)` for real arrays *x* (any shape)."""
    v, _, _ = ml_eval(alpha, beta, np.asarray(x, dtype=float))
    return v.real


def mittag_leffler(p: MLParams, z: complex, tol: float = 1.0e-10, method=None) -> EvalResult:
    """Evaluate :math:`E_{\\alpha,\\beta}(z)` at a single point.

    :raises AccuracyError: if the error estimate exceeds ``tol * max(1, |E|)``;
        the best available result is attached to the exception.
    """
    if not np.isfinite(z):
        raise DomainError(f"argument must be finite: {z}")
    v, e, b = ml_eval(p.alpha, p.beta, np.array([z]), method=method)
    result = EvalResult(complex(v[0]), float(e[0]), Branch(int(b[0])))
    if not (math.isfinite(abs(result.value)) and result.est_error <= tol * max(1.0, abs(result.value))):
        raise AccuracyError(
            f"E_{{{p.alpha},{p.beta}}}({z}): estimated error {result.est_error:.3e} "
            f"above tolerance {tol:.1e}",
            best=result,
        )
    return result


def ml_time_derivative(alpha: float, lam: float, t: float, n: int) -> float:
    r"""n-th time derivative of :math:`t \mapsto E_{\alpha,1}(-\lambda t^\alpha)`.

    Uses :math:`\frac{d^n}{dt^n} E_{\alpha,1}(-\lambda t^\alpha)
    = -\lambda t^{\alpha-n} E_{\alpha,\alpha-n+1}(-\lambda t^\alpha)`.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1): got {alpha}")
    if n not in (1, 2):
        raise DomainError(f"only first and second derivatives are supported: n={n}")
    if not t > 0.0:
        raise DomainError(f"t must be positive: got {t}")
    if not lam > 0.0:
        raise DomainError(f"lambda must be positive: got {lam}")
    z = -lam * t**alpha
    return float(-lam * t ** (alpha - n) * mlf(alpha, alpha - n + 1.0, z))


@dataclass(frozen=True)
class SectorBoundReport:
    sup: float
    """Empirical ``sup |E(z)| (1 + |z|)`` over the samples (0 when empty)."""
    values: np.ndarray
    """Per-sample ``|E(z)| (1 + |z|)``."""


def ml_sector_bound_check(p: MLParams, mu: float, samples: Sequence[complex]) -> SectorBoundReport:
    """Empirical constant of the bound ``|E(z)| <= C / (1 + |z|)`` in ``mu <= |arg z| <= pi``."""
    lo = math.pi * p.alpha / 2.0
    hi = min(math.pi, math.pi * p.alpha)
    if not lo < mu < hi:
        raise DomainError(f"mu must lie in ({lo:.6g}, {hi:.6g}): got {mu}")

    z = np.asarray(samples, dtype=complex).ravel()
    if z.size == 0:
        return SectorBoundReport(0.0, np.zeros(0))
    if np.any(np.abs(np.angle(z)) < mu * (1.0 - 1.0e-12)):
        raise DomainError(f"all samples must satisfy |arg z| >= mu = {mu}")

    v, _, _ = ml_eval(p.alpha, p.beta, z)
    ratio = np.abs(v) * (1.0 + np.abs(z))
    return SectorBoundReport(float(ratio.max()), ratio)


def ml_relaxation_derivative(alpha: float, lam: float, t, n: int) -> np.ndarray:
    r"""``d^n/dt^n E_{alpha,1}(-lam t^alpha)`` for any ``n >= 0`` (vectorized in *t*)."""
    t = np.asarray(t, dtype=float)
    z = -lam * t**alpha
    if n == 0:
        return mlf(alpha, 1.0, z)
    return -lam * t ** (alpha - n) * mlf(alpha, alpha - n + 1.0, z)


@dataclass(frozen=True)
class MonotonicityReport:
    alpha: float
    lam: float
    holds: dict
    """``n -> bool``: sign of the n-th divided difference is ``(-1)^n`` everywhere."""
    derivative_holds: dict
    """Same check on the closed-form derivatives."""

    @property
    def passed(self) -> bool:
        return all(self.holds.values()) and all(self.derivative_holds.values())


def complete_monotonicity_check(
    alpha: float, lam: float, t, nmax: int = 3, rel_step: float = 0.05
) -> MonotonicityReport:
    r"""Sign pattern ``(-1)^n f^{(n)} >= 0`` of ``f(t) = E_{alpha,1}(-lam t^alpha)``.

    Forward differences ``Delta_h^n f(t)`` with ``h = rel_step * t`` equal
    ``h^n f^{(n)}(xi)`` for some ``xi`` in ``(t, t + n h)``, so their signs are a
    faithful proxy for the signs of the derivatives.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise DomainError("t must be positive")
    holds, dholds = {}, {}
    h = rel_step * t
    vals = np.stack([mlf(alpha, 1.0, -lam * (t + k * h) ** alpha) for k in range(nmax + 1)])
    for n in range(nmax + 1):
        diff = np.zeros_like(t)
        for k in range(n + 1):
            diff += (-1) ** (n - k) * math.comb(n, k) * vals[k]
        holds[n] = bool(np.all((-1) ** n * diff > 0.0))
        d = ml_relaxation_derivative(alpha, lam, t, n)
        dholds[n] = bool(np.all((-1) ** n * d > 0.0))
    return MonotonicityReport(alpha, lam, holds, dholds)
