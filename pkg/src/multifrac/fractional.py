r"""Discrete Riemann-Liouville integrals and L1 Caputo derivatives.

Both rules replace the sampled function by its piecewise-linear interpolant
and integrate the weakly singular kernel exactly on every subinterval.  On
uniform grids the weights only depend on the index difference and the sums
are evaluated as FFT convolutions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy import special as sc

from .errors import DomainError


class GridKind(enum.Enum):
    UNIFORM = "uniform"
    GRADED = "graded"


@dataclass(frozen=True)
class TimeGrid:
    """Time nodes ``0 = t_0 < t_1 < ... < t_K = T``."""

    times: np.ndarray
    kind: GridKind = GridKind.GRADED
    grading: float = 1.0

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.size < 2:
            raise DomainError("a time grid needs at least two nodes")
        if t[0] != 0.0:
            raise DomainError(f"time grids start at 0: t_0 = {t[0]}")
        if np.any(np.diff(t) <= 0.0):
            raise DomainError("time nodes must be strictly increasing")
        if self.grading < 1.0:
            raise DomainError(f"grading exponent must be >= 1: got {self.grading}")

    @classmethod
    def uniform(cls, T: float, K: int) -> TimeGrid:
        return cls(T * np.arange(K + 1) / K, GridKind.UNIFORM, 1.0)

    @classmethod
    def graded(cls, T: float, K: int, r: float) -> TimeGrid:
        """``t_k = T (k/K)^r``."""
        if r < 1.0:
            raise DomainError(f"grading exponent must be >= 1: got {r}")
        if r == 1.0:
            return cls.uniform(T, K)
        return cls(T * (np.arange(K + 1) / K) ** r, GridKind.GRADED, float(r))

    @property
    def K(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def is_uniform(self) -> bool:
        return self.kind is GridKind.UNIFORM


def default_grading(alpha: float, cap: float = 4.0) -> float:
    """Grading exponent ``(2 - alpha)/alpha`` capped at *cap*."""
    return float(min(max((2.0 - alpha) / alpha, 1.0), cap))


def _as_grid(grid) -> TimeGrid:
    return grid if isinstance(grid, TimeGrid) else TimeGrid(np.asarray(grid, dtype=float))


def pow_diff(b, a, p: float) -> np.ndarray:
    """``b**p - a**p`` for ``0 <= a < b`` without cancellation when ``a ~ b``."""
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(b**p) * np.expm1(p * np.log1p(-(b - a) / b))
    # a = 0 gives log1p(-1) = -inf, which expm1 maps to the exact answer,
    # except when p < 0 (not used here)
    return np.where(b > 0.0, out, 0.0)


def _moments(alpha: float, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r"""``M0 = \int_a^b s^{alpha-1} ds`` and ``M1 = \int_a^b s^{alpha-1} (b - s) ds``."""
    m0 = pow_diff(b, a, alpha) / alpha
    m1 = b * m0 - pow_diff(b, a, alpha + 1.0) / (alpha + 1.0)
    return m0, m1


def rl_weights(alpha: float, grid) -> np.ndarray:
    r"""Matrix ``W`` with ``(J^alpha f)(t_m) = sum_i W[m, i] f_i``.

    Row 0 is zero.  ``W`` has shape ``(K+1, K+1)`` and is lower triangular.
    """
    if not alpha > 0.0:
        raise DomainError(f"alpha must be positive: got {alpha}")
    t = _as_grid(grid).times
    K = t.size - 1
    W = np.zeros((K + 1, K + 1))
    hstep = np.diff(t)
    for m in range(1, K + 1):
        b = t[m] - t[:m]
        a = t[m] - t[1 : m + 1]
        m0, m1 = _moments(alpha, a, b)
        W[m, :m] += m0 - m1 / hstep[:m]
        W[m, 1 : m + 1] += m1 / hstep[:m]
    return W / math.gamma(alpha)


def _rl_uniform(alpha: float, h: float, f: np.ndarray) -> np.ndarray:
    K = f.shape[-1] - 1
    j = np.arange(1, K + 1, dtype=float)
    m0, m1 = _moments(alpha, (j - 1.0) * h, j * h)
    A = np.concatenate([[0.0], m0 - m1 / h])  # multiplies f_{m-j}
    B = np.concatenate([[0.0], m1 / h])  # multiplies f_{m-j+1}
    out = signal.fftconvolve(f, A[None, :] if f.ndim == 2 else A, axes=-1)[..., : K + 1]
    # the B-part pairs f_i (i >= 1) with B_{m-i+1}
    Bshift = B[1:]
    g = f[..., 1:]
    outB = signal.fftconvolve(g, Bshift[None, :] if f.ndim == 2 else Bshift, axes=-1)[..., :K]
    res = out + np.concatenate([np.zeros(f.shape[:-1] + (1,)), outB], axis=-1)
    return res / math.gamma(alpha)


def rl_integral(alpha: float, samples, grid) -> np.ndarray:
    r"""Product-integration approximation of :math:`(J^\alpha f)(t_m)` at every node.

    :arg samples: values ``f(t_0), ..., f(t_K)`` (last axis).
    """
    if not alpha > 0.0:
        raise DomainError(f"alpha must be positive: got {alpha}")
    grid = _as_grid(grid)
    f = np.asarray(samples, dtype=float)
    if f.shape[-1] != grid.times.size:
        raise DomainError(f"{f.shape[-1]} samples for {grid.times.size} time nodes")
    if grid.is_uniform and f.ndim <= 2:
        out = _rl_uniform(alpha, float(grid.times[1]), f)
        out[..., 0] = 0.0
        return out
    return f @ rl_weights(alpha, grid).T


def l1_weights(alpha: float, grid) -> np.ndarray:
    r"""Matrix ``C`` with ``(D^alpha f)(t_m) ~ sum_{i<m} C[m, i] (f_{i+1} - f_i)``.

    ``C[m, i] = ((t_m - t_i)^{1-alpha} - (t_m - t_{i+1})^{1-alpha})
    / (Gamma(2 - alpha) (t_{i+1} - t_i))``; shape ``(K+1, K)``, row 0 zero.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1): got {alpha}")
    t = _as_grid(grid).times
    K = t.size - 1
    hstep = np.diff(t)
    C = np.zeros((K + 1, K))
    for m in range(1, K + 1):
        C[m, :m] = pow_diff(t[m] - t[:m], t[m] - t[1 : m + 1], 1.0 - alpha) / hstep[:m]
    return C / math.gamma(2.0 - alpha)


def caputo_l1(alpha: float, samples, grid) -> np.ndarray:
    r"""L1 approximation of the Caputo derivative at ``t_1, ..., t_K``.

    The result has length ``K`` (one value per node after ``t_0``).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1): got {alpha}")
    grid = _as_grid(grid)
    f = np.asarray(samples, dtype=float)
    if f.shape[-1] != grid.times.size:
        raise DomainError(f"{f.shape[-1]} samples for {grid.times.size} time nodes")
    df = np.diff(f, axis=-1)
    if grid.is_uniform and f.ndim <= 2:
        h = float(grid.times[1])
        K = grid.K
        j = np.arange(1, K + 1, dtype=float)
        b = pow_diff(j, j - 1.0, 1.0 - alpha) * h ** (-alpha) / math.gamma(2.0 - alpha)
        out = signal.fftconvolve(df, b[None, :] if df.ndim == 2 else b, axes=-1)[..., :K]
        # a constant function has df == 0 exactly; keep the result exact
        return np.where(np.all(df == 0.0, axis=-1, keepdims=True), 0.0, out)
    return (df @ l1_weights(alpha, grid).T)[..., 1:]


@dataclass(frozen=True)
class RoundtripReport:
    max_deviation: float
    deviation: np.ndarray


def caputo_roundtrip_check(alpha: float, samples, grid) -> RoundtripReport:
    r"""Compare :math:`J^\alpha(\partial_t^\alpha f)` with :math:`f - f(0)` on the grid.

    The discrete derivative is extended by 0 at ``t_0`` (its value for
    continuously differentiable ``f``).
    """
    grid = _as_grid(grid)
    f = np.asarray(samples, dtype=float)
    d = caputo_l1(alpha, f, grid)
    d = np.concatenate([np.zeros(d.shape[:-1] + (1,)), d], axis=-1)
    dev = rl_integral(alpha, d, grid) - (f - f[..., :1])
    return RoundtripReport(float(np.max(np.abs(dev))), dev)


def power_rule(alpha: float, beta: float, t) -> np.ndarray:
    r"""Exact :math:`J^\alpha t^\beta = \Gamma(\beta+1)/\Gamma(\beta+1+\alpha)\, t^{\alpha+\beta}`."""
    t = np.asarray(t, dtype=float)
    return np.exp(sc.gammaln(beta + 1.0) - sc.gammaln(beta + 1.0 + alpha)) * t ** (alpha + beta)
