"""Problem description and spatial discretization.

A :class:`ProblemSpec` holds the continuous data (vectorized callables of
``x``); :func:`discretize` samples it on a uniform grid of interior nodes and
assembles the finite-difference operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import SpecError

Coefficient = Callable[[np.ndarray], np.ndarray]


def _const(c: float) -> Coefficient:
    return lambda x: np.full_like(np.asarray(x, dtype=float), c)


@dataclass(frozen=True)
class OrderSet:
    """Strictly decreasing fractional orders in (0, 1)."""

    alphas: tuple[float, ...]

    def __post_init__(self) -> None:
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise SpecError("at least one order is required")
        if not all(0.0 < a < 1.0 for a in alphas):
            raise SpecError(f"orders must lie in (0, 1): {alphas}")
        if any(a <= b for a, b in zip(alphas, alphas[1:])):
            raise SpecError(f"orders must be strictly decreasing: {alphas}")

    def __len__(self) -> int:
        return len(self.alphas)

    @property
    def alpha1(self) -> float:
        return self.alphas[0]

    @property
    def smallest(self) -> float:
        return self.alphas[-1]


@dataclass(frozen=True)
class ProblemSpec:
    """Multi-term time-fractional diffusion problem on an interval.

    The equation is ``sum_j q_j d_t^{alpha_j} u = d_x(a11 d_x u) + B d_x u + b u``
    with homogeneous Dirichlet data and ``u(., 0) = initial``.
    """

    orders: OrderSet
    weights: Sequence[Coefficient]
    initial: Coefficient
    domain: tuple[float, float] = (0.0, np.pi)
    diffusion: Coefficient = field(default_factory=lambda: _const(1.0))
    potential: Coefficient | None = None
    convection: Coefficient | None = None

    def __post_init__(self) -> None:
        lo, hi = self.domain
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise SpecError(f"invalid domain {self.domain}")
        if len(self.weights) != len(self.orders):
            raise SpecError(
                f"{len(self.weights)} weights given for {len(self.orders)} orders"
            )

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def with_orders(self, alphas: Sequence[float]) -> ProblemSpec:
        """Same problem with the orders replaced (weights are kept)."""
        from dataclasses import replace

        return replace(self, orders=OrderSet(tuple(alphas)))

    def with_initial(self, initial: Coefficient) -> ProblemSpec:
        from dataclasses import replace

        return replace(self, initial=initial)


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of ``n`` interior nodes."""

    domain: tuple[float, float]
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise SpecError(f"need at least one interior node: n={self.n}")

    @property
    def h(self) -> float:
        return (self.domain[1] - self.domain[0]) / (self.n + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.domain[0] + self.h * np.arange(1, self.n + 1)

    @cached_property
    def midpoints(self) -> np.ndarray:
        """The n + 1 cell midpoints, including the two next to the boundary."""
        return self.domain[0] + self.h * (np.arange(self.n + 1) + 0.5)


def _sample(fn: Coefficient, x: np.ndarray) -> np.ndarray:
    v = np.asarray(fn(x), dtype=float)
    if v.shape != x.shape:
        v = np.broadcast_to(v, x.shape).copy()
    if not np.all(np.isfinite(v)):
        raise SpecError("coefficient produced non-finite values")
    return v


@dataclass(frozen=True)
class Discretization:
    """Sampled coefficients and tridiagonal operators on a :class:`Grid1D`.

    ``A`` is the pure divergence-form part; the potential and the convection
    are kept separately (``b`` as a diagonal, ``conv_lower``/``conv_upper``
    as the off-diagonals of the centred first-derivative operator).
    """

    spec: ProblemSpec
    grid: Grid1D
    diag: np.ndarray
    offdiag: np.ndarray
    b: np.ndarray
    conv_lower: np.ndarray
    conv_upper: np.ndarray
    q: np.ndarray
    a: np.ndarray

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def has_potential(self) -> bool:
        return bool(np.any(self.b != 0.0))

    @property
    def has_convection(self) -> bool:
        return bool(np.any(self.conv_upper != 0.0))

    @cached_property
    def basis(self):
        from .operator import eigendecompose

        return eigendecompose(self)

    def apply_A(self, v: np.ndarray) -> np.ndarray:
        """``A_h v`` along the last axis."""
        out = self.diag * v
        out[..., :-1] += self.offdiag * v[..., 1:]
        out[..., 1:] += self.offdiag * v[..., :-1]
        return out

    def apply_lower_order(self, v: np.ndarray) -> np.ndarray:
        """``(B d_x + b) v`` along the last axis."""
        out = self.b * v
        if self.has_convection:
            out[..., :-1] += self.conv_upper * v[..., 1:]
            out[..., 1:] += self.conv_lower * v[..., :-1]
        return out

    def require_sign_hypotheses(self) -> None:
        """Check ``b <= 0``, ``q_j >= 0`` and ``q_j`` not identically zero."""
        if np.any(self.b > 0.0):
            raise SpecError("the potential b must be non-positive")
        if np.any(self.q < 0.0):
            raise SpecError("the weights q_j must be non-negative")
        if np.any(np.all(self.q == 0.0, axis=1)):
            raise SpecError("a weight q_j vanishes identically")

    def require_no_convection(self) -> None:
        if self.has_convection:
            raise SpecError("convection is only supported by the time-domain solvers")


def discretize(spec: ProblemSpec, n: int) -> Discretization:
    """Conservative second-order finite differences on ``n`` interior nodes."""
    grid = Grid1D(tuple(spec.domain), int(n))
    x, h = grid.nodes, grid.h

    k = _sample(spec.diffusion, grid.midpoints)
    if np.min(k) <= 0.0:
        raise SpecError(f"diffusion coefficient must be positive: min = {np.min(k):.3g}")
    diag = (k[:-1] + k[1:]) / h**2
    offdiag = -k[1:-1] / h**2

    b = _sample(spec.potential, x) if spec.potential is not None else np.zeros(grid.n)
    if spec.convection is not None:
        B = _sample(spec.convection, x)
    else:
        B = np.zeros(grid.n)
    conv_upper = B[:-1] / (2.0 * h)
    conv_lower = -B[1:] / (2.0 * h)

    q = np.stack([_sample(fn, x) for fn in spec.weights])
    if not np.allclose(q[0], 1.0, rtol=0.0, atol=1e-14):
        raise SpecError("the leading weight q_1 must be identically 1")

    a = _sample(spec.initial, x)
    return Discretization(spec, grid, diag, offdiag, b, conv_lower, conv_upper, q, a)
