from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import roots_jacobi, roots_legendre

from conftest import MODE_LAMBDA, MODE_PHI, make_spec
from multifrac.errors import ContourResolutionError, DomainError, NonConvergenceError, SpecError
from multifrac.fractional import TimeGrid
from multifrac.operator import l2_norm
from multifrac.problem import discretize
from multifrac.solvers import (
    ContourSpec,
    Field,
    MildSolutionMap,
    convolution_weights,
    default_time_grid,
    integral_equation_residual,
    invert_laplace,
    l1_solve,
    laplace_solve,
    picard_solve,
    spectral_field,
    spectral_single_term,
)
from multifrac.special import mlf


def mode_value(u: Field, t: float) -> float:
    k = int(np.argmin(np.abs(u.times - t)))
    assert abs(u.times[k] - t) < 1e-12
    return float(u.values[:, k] @ np.sin(u.nodes) / (np.sin(u.nodes) @ np.sin(u.nodes)))


def test_mode_eigenvalue(mode_disc):
    assert mode_disc.basis.values[0] == pytest.approx(MODE_LAMBDA, rel=1e-14)


def test_laplace_two_term_mode(mode_disc):
    t = np.array(sorted(MODE_PHI))
    u = laplace_solve(mode_disc, t)
    for tk in t:
        assert mode_value(u, tk) == pytest.approx(MODE_PHI[tk], abs=1e-10)
    # the field stays in the first mode
    resid = u.values - np.outer(np.sin(u.nodes), [MODE_PHI[tk] for tk in t])
    assert np.max(np.abs(resid)) < 1e-10


def test_l1_two_term_mode(mode_disc):
    g = TimeGrid(np.union1d(default_time_grid((0.8, 0.4), 5.0, 512).times, [0.1, 1.0]))
    u = l1_solve(mode_disc, g)
    for tk, ref in MODE_PHI.items():
        assert mode_value(u, tk) == pytest.approx(ref, abs=2e-4)


def test_picard_two_term_mode(mode_disc):
    for T, budget in ((0.1, 30), (1.0, 80)):
        u, state = picard_solve(mode_disc, default_time_grid((0.8, 0.4), T, 64), tol=1e-8, max_iter=budget)
        assert np.all(np.diff(np.log(state.history[-5:])) < 0)
        assert mode_value(u, T) == pytest.approx(MODE_PHI[T], abs=1e-5)


def test_l1_first_order_convergence_in_time(mode_disc):
    errs = []
    for K in (64, 128, 256):
        g = default_time_grid((0.8, 0.4), 1.0, K)
        errs.append(abs(mode_value(l1_solve(mode_disc, g), 1.0) - MODE_PHI[1.0]))
    assert errs[2] < errs[1] < errs[0]
    assert math.log2(errs[1] / errs[2]) > 0.7


def test_spectral_matches_ml(mode_disc):
    basis = mode_disc.basis
    a = np.sin(mode_disc.grid.nodes)
    t = np.array([0.0, 0.3, 2.0])
    u = spectral_single_term(basis, 0.6, a, t)
    assert np.allclose(u, np.outer(mlf(0.6, 1.0, -MODE_LAMBDA * t**0.6), a), atol=1e-13)
    with pytest.raises(DomainError):
        spectral_field(mode_disc, t)


@pytest.fixture(scope="module")
def single():
    spec = make_spec(orders=(0.5,), initial=lambda x: x * (np.pi - x))
    return discretize(spec, 127)


def test_laplace_vs_spectral_single_term(single):
    t = np.logspace(-1, 1, 11)
    assert np.max(np.abs(laplace_solve(single, t).values - spectral_field(single, t).values)) < 1e-9


def test_l1_vs_spectral_single_term(single):
    g = default_time_grid((0.5,), 1.0, 256)
    err = np.max(np.abs(l1_solve(single, g).values - spectral_field(single, g.times).values))
    assert err < 1e-3


def test_picard_single_term_is_one_step(single):
    g = default_time_grid((0.5,), 1.0, 16)
    u, state = picard_solve(single, g)
    assert state.n == 2 and state.history[-1] == 0.0
    assert np.allclose(u.values, spectral_field(single, g.times).values, atol=1e-13)


def test_picard_budget(bench_disc):
    g = default_time_grid((0.8, 0.4), 1.0, 16)
    with pytest.raises(NonConvergenceError) as exc:
        picard_solve(bench_disc, g, max_iter=3)
    assert len(exc.value.history) == 3
    with pytest.raises(DomainError):
        picard_solve(bench_disc, g, gamma=1.0)


def test_lower_order_terms_l1_vs_picard():
    spec = make_spec(potential=lambda x: -0.5 * np.ones_like(x), convection=lambda x: 0.3 * np.cos(x))
    disc = discretize(spec, 63)
    g = default_time_grid((0.8, 0.4), 0.5, 32)
    up, state = picard_solve(disc, g, tol=1e-9, max_iter=80)
    gl = default_time_grid((0.8, 0.4), 0.5, 32 * 16)
    ul = l1_solve(disc, gl).at(np.arange(0, 32 * 16 + 1, 16))
    rel = np.max(l2_norm(disc.h, (up.values - ul.values).T)) / np.max(l2_norm(disc.h, ul.values.T))
    assert rel < 2e-3
    assert integral_equation_residual(up, disc) < 1e-6
    with pytest.raises(SpecError):
        laplace_solve(disc, [1.0])


def test_laplace_with_potential_matches_l1():
    spec = make_spec(potential=lambda x: -1.0 - 0 * x)
    disc = discretize(spec, 63)
    g = default_time_grid((0.8, 0.4), 2.0, 1024)
    ul = l1_solve(disc, g)
    lap = laplace_solve(disc, [2.0])
    assert np.max(np.abs(ul.values[:, -1] - lap.values[:, 0])) < 2e-4


# {{{ product integration


def gauss_jacobi_convolution(alpha, beta, lam, t, g, m, nq=60):
    """Same integral with the substitution sigma = tau^alpha on the singular segment."""
    total = 0.0
    for i in range(m):
        a, b = t[i], t[i + 1]
        h = b - a
        if i == m - 1:
            S = h**alpha
            x, w = roots_jacobi(nq, 0.0, beta / alpha - 1.0)
            sig = (x + 1) * S / 2
            r = t[m] - sig ** (1 / alpha)
            fac = (S / 2) ** (beta / alpha) / alpha
            kern = mlf(alpha, beta, -lam * sig)
        else:
            x, w = roots_legendre(nq)
            r = a + (x + 1) * h / 2
            tau = t[m] - r
            fac = h / 2
            kern = tau ** (beta - 1) * mlf(alpha, beta, -lam * tau**alpha)
        total += fac * np.sum(w * kern * (g[i] + (g[i + 1] - g[i]) * (r - a) / h))
    return total


@pytest.mark.parametrize("alpha, beta", [(0.5, 0.5), (0.5, 0.2), (0.25, 0.25), (0.25, 0.1)])
def test_convolution_weights_gauss_jacobi(alpha, beta):
    t = np.array([0.0, 0.05, 0.2, 0.45, 0.7, 1.0])
    g = np.sin(3 * t) + 1
    lam = np.array([0.5, 3.0, 40.0])
    W = convolution_weights(alpha, beta, lam, t)
    for m in (1, 3, 5):
        for k, lk in enumerate(lam):
            assert W[m, :, k] @ g == pytest.approx(gauss_jacobi_convolution(alpha, beta, lk, t, g, m), abs=1e-12)


def test_convolution_weights_constant_data():
    # int_0^t tau^{b-1} E_{a,b}(-lam tau^a) dtau = t^b E_{a,b+1}(-lam t^a)
    t = TimeGrid.graded(2.0, 20, 2.0).times
    lam = np.array([0.0, 1.0, 7.0])
    W = convolution_weights(0.7, 0.3, lam, t)
    exact = t[:, None] ** 0.3 * mlf(0.7, 1.3, -np.outer(t**0.7, lam))
    assert np.allclose(W.sum(axis=1), exact, atol=1e-13)


def test_mild_map_needs_grid_from_zero(bench_disc):
    with pytest.raises(DomainError):
        MildSolutionMap(bench_disc, np.array([0.1, 0.2]), bench_disc.a)


# }}}


# {{{ contour


def test_contour_validation():
    with pytest.raises(DomainError):
        ContourSpec(1.0, 1e-3, 1e3, 0.1)
    with pytest.raises(DomainError):
        ContourSpec(2.0, 1.0, 0.5, 0.1)
    with pytest.raises(DomainError):
        ContourSpec.default((0.8, 0.4), [0.0, 1.0])
    with pytest.raises(DomainError):
        ContourSpec.default((0.8, 0.4), [1.0], theta=3.0)


def test_contour_inverts_known_transform():
    # L[E_{a,1}(-t^a)](s) = s^{a-1} / (s^a + 1)
    alpha = 0.6
    t = np.logspace(-2, 2, 9)
    c = ContourSpec.default((alpha,), t, 1e-12)
    s, _ = c.nodes()
    f = invert_laplace(c, s ** (alpha - 1) / (s**alpha + 1), t)
    assert np.allclose(f, mlf(alpha, 1.0, -(t**alpha)), atol=1e-10)


def test_contour_resolution_error():
    c = ContourSpec.default((0.5,), [1.0, 10.0])
    s, _ = c.nodes()
    with pytest.raises(ContourResolutionError):
        invert_laplace(c, 1.0 / s, [1e-4])


# }}}


def test_field_helpers(mode_disc):
    u = laplace_solve(mode_disc, [0.5, 1.0])
    x, v = u.with_boundary(mode_disc.spec.domain)
    assert x[0] == 0.0 and x[-1] == pytest.approx(np.pi) and np.all(v[[0, -1]] == 0.0)
    assert u.at([1]).times.tolist() == [1.0]
    with pytest.raises(DomainError):
        Field(np.zeros((2, 2)), np.zeros(3), np.zeros(2))


def test_spectral_reproduces_initial_data(single):
    assert np.max(np.abs(spectral_field(single, [0.0]).values[:, 0] - single.a)) <= 1e-10
