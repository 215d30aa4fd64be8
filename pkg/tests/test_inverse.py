from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import make_spec
from multifrac.errors import DegenerateOrdersError, DomainError, NonIdentificationWarning, SpecError, TailError
from multifrac.inverse import (
    Observation,
    PowerTail,
    _from_orders,
    _to_orders,
    a_coefficients,
    discriminator,
    estimate_orders,
    fit_tail,
    observation_laplace,
    point_sampler,
    q1_weight,
    reference_w0,
)
from multifrac.problem import discretize
from multifrac.solvers import default_time_grid, l1_solve


def test_observation_validation():
    with pytest.raises(DomainError):
        Observation(1.0, np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(DomainError):
        Observation(1.0, np.array([1.0, 0.5]), np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        Observation(1.0, np.array([0.0, 1.0]), np.array([1.0, np.nan]))


def test_observation_laplace_piecewise_linear_exact():
    t = np.array([0.0, 0.5, 2.0, 3.0])
    f = np.array([1.0, 2.0, -1.0, 0.5])
    obs = Observation(0.0, t, f)
    for s in (0.01, 0.7, 5.0):
        ref = sum(
            integrate.quad(lambda r: (f[i] + (f[i + 1] - f[i]) * (r - t[i]) / (t[i + 1] - t[i])) * math.exp(-s * r), t[i], t[i + 1])[0]
            for i in range(3)
        )
        assert observation_laplace(obs, s, tail="none") == pytest.approx(ref, rel=1e-12)


def test_observation_laplace_with_exact_tail():
    t = np.linspace(0, 5, 5001)
    obs = Observation(0.0, t, np.exp(-t))
    s = np.array([0.1, 1.0])
    got = observation_laplace(obs, s, tail=lambda sk: math.exp(-(sk + 1) * 5) / (sk + 1))
    assert np.allclose(got, 1 / (s + 1), rtol=1e-7)


def test_power_tail():
    tail = PowerTail(2.0, 0.4)
    s, T = 0.3, 7.0
    ref = integrate.quad(lambda r: 2.0 * r**-0.4 * math.exp(-s * r), T, np.inf)[0]
    assert tail.laplace(s, T) == pytest.approx(ref, rel=1e-9)


def test_fit_tail():
    t = np.linspace(0, 100, 2001)
    obs = Observation(0.0, t, 1.5 * np.maximum(t, 1e-3) ** -0.3)
    tail = fit_tail(obs)
    assert tail.p == pytest.approx(0.3, abs=1e-6) and tail.c == pytest.approx(1.5, rel=1e-5)
    with pytest.raises(TailError):
        fit_tail(Observation(0.0, t, np.exp(-t / 5)))


def test_a_coefficients():
    A = a_coefficients((0.8, 0.4), (0.8, 0.5), 1e-3)
    assert np.sum(np.abs(A)) == pytest.approx(1.0)
    assert A[0] == 0.0 and A[1] > 0
    # swapping the roles gives the same arrangement
    assert np.allclose(a_coefficients((0.8, 0.5), (0.8, 0.4), 1e-3), A)
    with pytest.raises(DegenerateOrdersError):
        a_coefficients((0.8, 0.4), (0.8, 0.4), 0.1)
    with pytest.raises(DomainError):
        a_coefficients((0.8, 0.4), (0.8, 0.5), 2.0)


def test_q1_limit():
    q = [1.0, 1.7]
    assert q1_weight((0.9, 0.3), (0.6, 0.35), q, 1e-12) == pytest.approx(1.7, abs=0.02)
    with pytest.raises(SpecError):
        q1_weight((0.9, 0.3), (0.6, 0.35), [1.0], 1e-3)


@given(
    a=st.lists(st.floats(0.01, 0.99), min_size=1, max_size=4, unique=True),
)
@settings(max_examples=60, deadline=None)
def test_order_parametrization_roundtrip(a):
    a = sorted(a, reverse=True)
    if min(np.diff(a), default=-1.0) > -1e-6:
        return
    assert np.allclose(_to_orders(_from_orders(a)), a, rtol=1e-10)


@given(p=st.lists(st.floats(-20, 20), min_size=1, max_size=4))
@settings(max_examples=60, deadline=None)
def test_parametrization_stays_admissible(p):
    a = _to_orders(np.array(p))
    assert np.all(a > 0) and np.all(a < 1) and np.all(np.diff(a) <= 0)


def test_point_sampler(bench_disc):
    x = bench_disc.grid.nodes
    sample = point_sampler(bench_disc, math.pi / 2)
    assert sample(3 * x + 1) == pytest.approx(3 * math.pi / 2 + 1, rel=1e-13)
    # the neighbour of the boundary counts as zero
    near = point_sampler(bench_disc, bench_disc.h / 2)
    assert near(np.ones(bench_disc.n)) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        point_sampler(bench_disc, 0.0)


def test_discriminator_benchmark(bench_disc):
    tr = discriminator(bench_disc, (0.8, 0.4), (0.8, 0.5), math.pi / 2)
    assert tr.j0 == 1
    assert tr.relative_gap < 0.05
    assert tr.q1_values[-1] == pytest.approx(1 + (math.pi / 2) ** 2 / 4, rel=1e-3)
    w0 = reference_w0(bench_disc, 1)
    assert np.all(w0 > 0)
    with pytest.raises(DomainError):
        discriminator(bench_disc, (0.8, 0.4), (0.8, 0.5), 1.0, s_grid=[0.1, 0.2])


def test_discriminator_from_records():
    disc = discretize(make_spec(), 63)
    g = default_time_grid((0.8, 0.4), 200.0, 2048)
    recs = []
    for orders in ((0.8, 0.4), (0.8, 0.5)):
        d = discretize(disc.spec.with_orders(orders), 63)
        u = point_sampler(d, 1.5)(l1_solve(d, g).snapshots)
        recs.append(Observation(1.5, g.times, u))
    tr = discriminator(disc, (0.8, 0.4), (0.8, 0.5), 1.5, s_grid=10.0 ** -np.arange(1, 4.0), observations=tuple(recs))
    exact = discriminator(disc, (0.8, 0.4), (0.8, 0.5), 1.5, s_grid=10.0 ** -np.arange(1, 4.0))
    assert np.allclose(tr.w_values, exact.w_values, rtol=0.05)


@pytest.fixture(scope="module")
def mode_record():
    disc = discretize(make_spec(), 63)
    g = default_time_grid((0.8, 0.4), 5.0, 512)
    u = point_sampler(disc, 1.0)(l1_solve(disc, g).snapshots)
    return disc, Observation(1.0, g.times, u)


def test_estimator_recovers_orders(mode_record):
    disc, obs = mode_record
    est = estimate_orders(disc, obs, (0.6, 0.2))
    assert est.identified
    assert np.allclose(est.orders.alphas, (0.8, 0.4), atol=0.01)
    assert est.diagnostics["initial_data_fixed_sign"]


def test_estimator_warns_when_budget_is_exhausted(mode_record):
    disc, obs = mode_record
    with pytest.warns(NonIdentificationWarning):
        est = estimate_orders(disc, obs, (0.6, 0.2), max_nfev=1)
    assert not est.identified


def test_estimator_input_validation(mode_record):
    disc, obs = mode_record
    with pytest.raises(SpecError):
        estimate_orders(disc, obs, (0.6,))
    with pytest.raises(SpecError):
        estimate_orders(disc, obs, (0.2, 0.6))


def test_exponential_record_transform():
    t = np.linspace(0, 40, 40001)
    obs = Observation(0.0, t, np.exp(-t))
    s = np.array([0.05, 0.5, 2.0])
    assert np.allclose(observation_laplace(obs, s, tail="none"), 1 / (1 + s), atol=1e-6)


def test_a_coefficients_three_cases():
    # j0 = 3; j = 1 has alpha > alpha~, j = 2 equal, j = 3 alpha < alpha~
    A = a_coefficients((0.9, 0.5, 0.2), (0.7, 0.5, 0.3), 1e-6)
    assert abs(A[0]) < 0.05 and A[1] == 0.0 and A[2] > 0.95
    # the opposite sign in j = 1
    A = a_coefficients((0.6, 0.5, 0.2), (0.8, 0.5, 0.3), 1e-6)
    assert abs(A[0]) < 0.05 and A[2] > 0.95


@given(seed=st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_q1_error_decreases(seed):
    from multifrac.acceptance import random_order_pairs

    (a, b), = random_order_pairs(np.random.default_rng(seed), count=1)
    q = [1.0, 1.6]
    j0 = 1 if a[1] != b[1] else 0
    errs = [abs(q1_weight(a, b, q, 10.0**-k) - q[j0]) for k in range(2, 9)]
    assert np.all(np.diff(errs) <= 1e-15)


def test_transform_positive_at_observation_point(bench_disc):
    from multifrac.solvers import laplace_transform

    s = 10.0 ** np.arange(-8, 3.0)
    u = point_sampler(bench_disc, math.pi / 2)(laplace_transform(bench_disc, s).real)
    assert np.all(u > 0)


def test_sign_changing_initial_data_is_flagged():
    disc = discretize(make_spec(initial=lambda x: np.sin(2 * x)), 31)
    g = default_time_grid((0.8, 0.4), 2.0, 64)
    obs = Observation(1.0, g.times, point_sampler(disc, 1.0)(l1_solve(disc, g).snapshots))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonIdentificationWarning)
        est = estimate_orders(disc, obs, (0.7, 0.3), max_nfev=3)
    assert not est.diagnostics["initial_data_fixed_sign"]
    assert "warning" in est.diagnostics
