"""Acceptance suite shared by ``multifrac accept`` and the test-suite.

Every criterion returns one :class:`CheckResult` per quantitative check and
writes its supporting data as CSV into the output directory.  Nothing that
depends on wall-clock time is written, so two runs with the same
configuration and seed produce identical files.
"""

from __future__ import annotations

import csv
import filecmp
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .asymptotics import fit_decay, verify_theorem_asymp
from .config import ExperimentConfig, Section
from .fractional import TimeGrid, caputo_l1, power_rule, rl_integral
from .inverse import Observation, discriminator, estimate_orders, point_sampler, q1_weight, reference_w0
from .operator import l2_norm, sobolev_norm
from .problem import Discretization, OrderSet, ProblemSpec, discretize
from .solvers import (
    default_time_grid,
    integral_equation_residual,
    l1_solve,
    laplace_solve,
    picard_solve,
    spectral_field,
)
from .special import complete_monotonicity_check, ml_eval


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    value: float
    threshold: str
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.criterion} {self.name}: {fmt(self.value)} ({self.threshold})"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(f"{float(v):.17g}")) if math.isfinite(v) else str(float(v))
    return str(v)


def write_csv(path: Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    """CSV with a header row and floats printed with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([f"{float(v):.17g}" if isinstance(v, (float, np.floating)) else fmt(v) for v in row])


# {{{ criteria


def criterion_1(cfg: ExperimentConfig, rng, out: Path) -> list[CheckResult]:
    x = np.linspace(-30.0, 30.0, 1201)
    v, _, _ = ml_eval(1.0, 1.0, x)
    rel = np.abs(v.real / np.exp(x) - 1.0)
    write_csv(out / "c1_exp.csv", ["x", "E11", "exp", "rel_err"], zip(x, v.real, np.exp(x), rel))

    e_half = float(ml_eval(0.5, 1.0, np.array([-1.0]))[0].real[0])
    ref = math.e * math.erfc(1.0)

    rows, ok = [], True
    t = np.logspace(-3.0, 3.0, 61)
    for alpha in (0.3, 0.5, 0.8):
        rep = complete_monotonicity_check(alpha, 1.0, t)
        for n in range(4):
            rows.append([alpha, n, rep.holds[n], rep.derivative_holds[n]])
        ok = ok and rep.passed
    write_csv(out / "c1_monotonicity.csv", ["alpha", "n", "differences_ok", "derivatives_ok"], rows)
    return [
        CheckResult(1, "E_{1,1} vs exp max relative error", float(rel.max()), "<= 1e-10", bool(rel.max() <= 1e-10)),
        CheckResult(1, "|E_{1/2,1}(-1) - e erfc(1)|", abs(e_half - ref), "<= 1e-9", abs(e_half - ref) <= 1e-9),
        CheckResult(1, "complete monotonicity n=0..3", float(ok), "all signs (-1)^n", ok),
    ]


def criterion_2(cfg: ExperimentConfig, rng, out: Path) -> list[CheckResult]:
    # power rule on a fine uniform grid
    g = TimeGrid.uniform(1.0, 20000)
    rows, worst = [], 0.0
    for _ in range(20):
        alpha = float(rng.uniform(0.05, 0.95))
        beta = float(rng.uniform(1.5, 3.0))
        err = float(np.max(np.abs(rl_integral(alpha, g.times**beta, g) - power_rule(alpha, beta, g.times))))
        rows.append([alpha, beta, err])
        worst = max(worst, err)
    write_csv(out / "c2_power_rule.csv", ["alpha", "beta", "max_abs_err"], rows)

    # semigroup on a graded grid (J^beta f behaves like t^beta near 0)
    g = TimeGrid.graded(1.0, 4096, 3.0)
    t = g.times
    rows, sg = [], 0.0
    for _ in range(5):
        a, b = (float(v) for v in rng.uniform(0.1, 0.9, 2))
        c = rng.normal(size=4)
        f = c[0] + c[1] * np.sin(2 * t) + c[2] * np.cos(3 * t) + c[3] * np.exp(-t)
        f = f / np.max(np.abs(f))
        err = float(np.max(np.abs(rl_integral(a, rl_integral(b, f, g), g) - rl_integral(a + b, f, g))))
        rows.append([a, b, err])
        sg = max(sg, err)
    write_csv(out / "c2_semigroup.csv", ["alpha", "beta", "max_abs_err"], rows)

    # L1 order on t^2
    rows, worst_dev = [], 0.0
    for alpha in (0.3, 0.5, 0.7):
        errs = []
        for K in (64, 128, 256, 512):
            g = TimeGrid.uniform(1.0, K)
            exact = 2.0 * g.times[1:] ** (2.0 - alpha) / math.gamma(3.0 - alpha)
            errs.append(float(np.max(np.abs(caputo_l1(alpha, g.times**2, g) - exact))))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        for K, e, o in zip((64, 128, 256, 512), errs, [math.nan] + list(orders)):
            rows.append([alpha, K, e, o])
        worst_dev = max(worst_dev, float(np.max(np.abs(orders - (2.0 - alpha)))))
    write_csv(out / "c2_l1_order.csv", ["alpha", "K", "max_err", "observed_order"], rows)
    return [
        CheckResult(2, "power rule max error (20 pairs)", worst, "<= 1e-8", worst <= 1e-8),
        CheckResult(2, "semigroup max error", sg, "<= 1e-6", sg <= 1e-6),
        CheckResult(2, "L1 order deviation from 2-alpha", worst_dev, "<= 0.3", worst_dev <= 0.3),
    ]


def _single_term_disc(cfg: ExperimentConfig, alpha: float) -> Discretization:
    spec = cfg.problem
    single = ProblemSpec(OrderSet((alpha,)), [lambda x: np.ones_like(x)], spec.initial, spec.domain, spec.diffusion)
    return discretize(single, cfg.n)


def criterion_3(cfg: ExperimentConfig, rng, out: Path) -> list[CheckResult]:
    disc = _single_term_disc(cfg, 0.5)
    g = default_time_grid((0.5,), 1.0, 1024)
    u1 = l1_solve(disc, g)
    us = spectral_field(disc, g.times)
    e1 = np.max(np.abs(u1.values - us.values), axis=0)

    t = np.logspace(-1.0, 1.0, 41)
    ul = laplace_solve(disc, t)
    us2 = spectral_field(disc, t)
    e2 = np.max(np.abs(ul.values - us2.values), axis=0)
    write_csv(out / "c3_l1_vs_spectral.csv", ["t", "max_node_err"], zip(g.times, e1))
    write_csv(out / "c3_laplace_vs_spectral.csv", ["t", "max_node_err"], zip(t, e2))
    return [
        CheckResult(3, "l1 vs spectral max node error (K=1024)", float(e1.max()), "<= 1e-3", bool(e1.max() <= 1e-3)),
        CheckResult(3, "laplace vs spectral max error t in [0.1, 10]", float(e2.max()), "<= 1e-6", bool(e2.max() <= 1e-6)),
    ]


def criterion_4(cfg: ExperimentConfig, rng, out: Path) -> list[CheckResult]:
    sec = cfg.section("picard")
    T = sec.float("T", 0.5)
    K = sec.int("K", 64)
    refine = sec.int("l1_refinement", 8)
    tol = sec.float("tol", 1e-6)
    max_iter = sec.int("max_iter", 30)

    disc = discretize(cfg.problem, cfg.n)
    grid = default_time_grid(cfg.problem.orders.alphas, T, K)
    try:
        u, state = picard_solve(disc, grid, gamma=0.5, tol=tol, max_iter=max_iter)
    except Exception as exc:  # report instead of aborting the suite
        history = getattr(exc, "history", [])
        write_csv(out / "c4_picard_history.csv", ["iteration", "d_n"], enumerate(history, 1))
        return [CheckResult(4, "picard iterations", float(len(history)), f"<= {max_iter}", False)]
    write_csv(out / "c4_picard_history.csv", ["iteration", "d_n"], enumerate(state.history, 1))

    res = integral_equation_residual(u, disc)
    gl = default_time_grid(cfg.problem.orders.alphas, T, K * refine)
    ul = l1_solve(disc, gl).at(np.arange(0, K * refine + 1, refine))
    num = l2_norm(disc.h, (u.values - ul.values).T)
    diff = float(num.max() / l2_norm(disc.h, ul.values.T).max())
    write_csv(out / "c4_picard_vs_l1.csv", ["t", "l2_diff"], zip(grid.times, num))
    return [
        CheckResult(4, "picard iterations to 1e-6", float(state.n), f"<= {max_iter}", state.converged and state.n <= 30),
        CheckResult(4, "integral equation residual", res, "<= 1e-5", res <= 1e-5),
        CheckResult(4, "picard vs l1 relative Linf(L2)", diff, "<= 1e-3", diff <= 1e-3),
    ]


def criterion_5(cfg: ExperimentConfig, rng, out: Path) -> list[CheckResult]:
    disc = discretize(cfg.problem, cfg.n)
    t = np.logspace(-4.0, -2.0, 21)
    u = laplace_solve(disc, t)
    nrm = sobolev_norm(disc.basis, 0.5, u.snapshots)
    fit = fit_decay(t, nrm, (1e-4, 1e-2))
    write_csv(out / "c5_short_time.csv", ["t", "norm_DA_half"], zip(t, nrm))
    return [CheckResult(5, "short-time slope of ||u||_{D(A^1/2)}", fit.slope, "in [-0.5, 0]", -0.5 <= fit.slope <= 0.0)]


def criterion_6(cfg: ExperimentConfig, rng, out: Path) -> list[CheckResult]:
    disc = discretize(cfg.problem, cfg.n)
    t = np.logspace(2.0, 4.0, 41)
    rep = verify_theorem_asymp(disc, t, window=(1e2, 1e4))
    write_csv(
        out / "c6_asymptotics.csv",
        ["t", "norm_u", "norm_u_minus_v", "norm_u_minus_ul"],
        zip(t, rep.norm_u, rep.norm_u_minus_v, rep.norm_u_minus_ul),
    )
    al = cfg.problem.orders.smallest
    s_u, s_ul = rep.fit_u.slope, rep.fit_u_minus_ul.slope
    return [
        CheckResult(6, "slope of ||u||_{L2} on [1e2, 1e4]", s_u, f"{-al} +- 0.05", abs(s_u + al) <= 0.05),
        CheckResult(6, "slope of ||u - u_l||_{H2}", s_ul, "<= -0.7", s_ul <= -0.7),
    ]


def random_order_pairs(rng, count: int = 20, gap: float = 0.25, separation: float = 0.05):
    """Two-term order pairs with ``alpha_1 - alpha_2 >= gap`` and ``|alpha_2 - alpha~_2| >= separation``."""
    pairs = []
    while len(pairs) < count:
        a2, b2 = rng.uniform(0.05, 0.7, 2)
        if abs(a2 - b2) < separation:
            continue
        a1 = rng.uniform(a2 + gap, 0.95) if a2 + gap < 0.95 else None
        b1 = rng.uniform(b2 + gap, 0.95) if b2 + gap < 0.95 else None
        if a1 is None or b1 is None:
            continue
        pairs.append(((float(a1), float(a2)), (float(b1), float(b2))))
    return pairs


def criterion_7(cfg: ExperimentConfig, rng, out: Path) -> list[CheckResult]:
    sec = cfg.section("inverse")
    x0 = sec.float("x0", "pi/2")
    disc = discretize(cfg.problem, cfg.n)
    q_x0 = point_sampler(disc, x0)(disc.q)

    rows, worst = [], 0.0
    for a, b in random_order_pairs(rng):
        j0 = 1 if a[1] != b[1] else 0
        q1 = q1_weight(a, b, q_x0, 1e-8)
        err = abs(q1 - q_x0[j0])
        rows.append([a[0], a[1], b[0], b[1], j0 + 1, q1, err])
        worst = max(worst, err)
    write_csv(out / "c7_q1_limit.csv", ["alpha1", "alpha2", "alt_alpha1", "alt_alpha2", "j0", "Q1", "abs_err"], rows)

    orders = cfg.problem.orders.alphas
    alt = tuple(sec.floats("alternative", [orders[0], orders[-1] + 0.1]))
    tr = discriminator(disc, orders, alt, x0)
    write_csv(out / "c7_discriminator.csv", ["s", "w", "Q1"], zip(tr.s_values, tr.w_values, tr.q1_values))

    w0 = reference_w0(disc, len(orders) - 1)
    return [
        CheckResult(7, "max |Q1(x0; 1e-8) - q_j0(x0)| (20 pairs)", worst, "<= 0.02", worst <= 0.02),
        CheckResult(7, "discriminator | |w| - |w0| | / |w0|", tr.relative_gap, "<= 0.05", tr.relative_gap <= 0.05),
        CheckResult(7, "min w0 over interior nodes", float(w0.min()), "> 0", bool(w0.min() > 0.0)),
    ]


def criterion_8(cfg: ExperimentConfig, rng, out: Path) -> list[CheckResult]:
    sec = cfg.section("inverse")
    x0 = sec.float("x0", "pi/2")
    T = sec.float("T", 10.0)
    K = sec.int("K", 1024)
    init = sec.floats("init", [0.7, 0.3])
    disc = discretize(cfg.problem, cfg.n)

    start = time.perf_counter()
    grid = default_time_grid(cfg.problem.orders.alphas, T, K)
    data = point_sampler(disc, x0)(l1_solve(disc, grid).snapshots)
    obs = Observation(x0, grid.times, data)
    est = estimate_orders(disc, obs, init)
    elapsed = time.perf_counter() - start

    true = np.asarray(cfg.problem.orders.alphas)
    got = np.asarray(est.orders.alphas)
    err = float(np.max(np.abs(got - true)))
    write_csv(
        out / "c8_estimate.csv",
        ["j", "true_alpha", "initial_alpha", "estimated_alpha"],
        [[j + 1, true[j], init[j], got[j]] for j in range(true.size)],
    )
    return [
        CheckResult(8, "max |alpha_est - alpha_true|", err, "<= 0.01", err <= 0.01),
        CheckResult(8, "estimator within 10 minutes", float(elapsed <= 600.0), "runtime <= 600 s", elapsed <= 600.0),
    ]


def criterion_9(cfg: ExperimentConfig, rng, out: Path) -> list[CheckResult]:
    disc = discretize(cfg.problem, cfg.n)
    rows, vals = [], []
    for K in (128, 256, 512):
        g = default_time_grid(cfg.problem.orders.alphas, 1.0, K)
        u = l1_solve(disc, g)
        au = l2_norm(disc.h, disc.apply_A(u.snapshots.copy()))
        val = float(np.sum(0.5 * (au[1:] + au[:-1]) * np.diff(g.times)))
        rows.append([K, val])
        vals.append(val)
    write_csv(out / "c9_lp_norm.csv", ["K", "integral_norm_Au"], rows)
    var = (max(vals) - min(vals)) / min(vals)
    return [CheckResult(9, "variation of int ||A_h u|| dt over refinements", var, "<= 0.2", var <= 0.2)]


CRITERIA: dict[int, Callable] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


# }}}


def run_criteria(cfg: ExperimentConfig, seed: int, out: Path, only=None, echo=None) -> list[CheckResult]:
    """Run criteria 1-9 and write their artifacts and ``acceptance.csv`` into *out*."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    results: list[CheckResult] = []
    for cid, fn in CRITERIA.items():
        if only is not None and cid not in only:
            continue
        # independent streams per criterion keep results stable under subsetting
        rng = np.random.default_rng([seed, cid])
        res = fn(cfg, rng, out)
        for r in res:
            if echo is not None:
                echo(r.line())
        results.extend(res)
    write_summary(out / "acceptance.csv", results)
    return results


def write_summary(path: Path, results: list[CheckResult]) -> None:
    write_csv(
        path,
        ["criterion", "check", "value", "threshold", "passed"],
        [[r.criterion, r.name, r.value, r.threshold, r.passed] for r in results],
    )


def compare_dirs(a: Path, b: Path) -> list[str]:
    """Names of files that differ (or exist on one side only)."""
    names_a = sorted(p.name for p in Path(a).iterdir() if p.is_file())
    names_b = sorted(p.name for p in Path(b).iterdir() if p.is_file())
    differ = sorted(set(names_a) ^ set(names_b))
    for name in sorted(set(names_a) & set(names_b)):
        if not filecmp.cmp(Path(a) / name, Path(b) / name, shallow=False):
            differ.append(name)
    return differ


def run_acceptance(cfg: ExperimentConfig, seed: int, out: Path, echo=None, rerun: bool = True) -> list[CheckResult]:
    """Full suite; criterion 10 re-runs 1-9 into a scratch directory and compares bytes."""
    out = Path(out)
    results = run_criteria(cfg, seed, out, echo=echo)
    if rerun:
        with tempfile.TemporaryDirectory() as scratch:
            run_criteria(cfg, seed, Path(scratch))
            differ = compare_dirs(out, Path(scratch))
        r = CheckResult(10, "files differing between two runs", float(len(differ)), "== 0", not differ)
        if echo is not None:
            echo(r.line())
        results.append(r)
        write_summary(out / "acceptance.csv", results)
    return results
