"""Command-line experiment harness.

Usage::

    multifrac <subcommand> [--config FILE] [--out DIR] [--threads N] [--seed S]

Subcommands write CSV artifacts into ``--out`` and return 0 when every check
in scope passes, 1 when a check fails, 2 on configuration errors and 3 on
numerical failures.  The CSV column orders are documented in the README.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("multifrac")

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _set_threads(n: int | None) -> None:
    # only effective before numpy is first imported
    if n is None:
        return
    if "numpy" in sys.modules:
        log.warning("--threads has no effect once numpy is loaded")
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="YAML configuration (default: built-in benchmark)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count")
    common.add_argument("--seed", type=int, default=None, help="seed for random test banks (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="multifrac", description="Multi-term time-fractional diffusion experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ml-eval", parents=[common], help="Mittag-Leffler tables and identity checks")
    sub.add_parser("solve", parents=[common], help="run one forward solver and write the field")
    sub.add_parser("crosscheck", parents=[common], help="compare two forward solvers")
    sub.add_parser("asymptotics", parents=[common], help="long-time decay report")
    sub.add_parser("invert", parents=[common], help="recover the orders from a point observation")
    a = sub.add_parser("accept", parents=[common], help="run the full acceptance suite")
    a.add_argument("--only", type=int, nargs="+", default=None, help="criteria to run (disables the rerun check)")
    return p


# {{{ subcommands


def _grid(cfg):
    from .solvers import default_time_grid

    sec = cfg.section("time")
    T = sec.float("T", 1.0)
    K = sec.int("K", 256)
    alphas = cfg.problem.orders.alphas
    if sec.get("grading") is None:
        return default_time_grid(alphas, T, K)
    from .fractional import TimeGrid

    return TimeGrid.graded(T, K, sec.float("grading"))


def _solve_with(method: str, cfg, disc, grid):
    import numpy as np

    from .config import ConfigError
    from .solvers import ContourSpec, _field, l1_solve, laplace_solve, picard_solve, spectral_field

    if method == "l1":
        return l1_solve(disc, grid)
    if method == "spectral":
        return spectral_field(disc, grid.times)
    if method == "picard":
        sec = cfg.section("picard")
        u, _ = picard_solve(disc, grid, tol=sec.float("tol", 1e-6), max_iter=sec.int("max_iter", 30))
        return u
    if method == "laplace":
        sec = cfg.section("contour")
        t = grid.times[1:]
        tol = sec.float("tol", 1e-12)
        theta = sec.get("theta")
        contour = ContourSpec.default(cfg.problem.orders.alphas, t, tol, None if theta is None else sec.float("theta"))
        u = laplace_solve(disc, t, contour, tol=tol)
        # u(0) = a exactly
        return _field(disc, np.vstack([disc.a[None, :], u.snapshots]), grid.times)
    raise ConfigError(f"solver.method must be one of l1, laplace, picard, spectral: got {method!r}")


def cmd_ml_eval(cfg, args) -> int:
    import numpy as np

    from .acceptance import criterion_1, write_csv
    from .special import ml_eval

    sec = cfg.section("ml_eval")
    alpha = sec.float("alpha", 0.5)
    beta = sec.float("beta", 1.0)
    lo, hi = sec.floats("range", [-10, 10])
    num = sec.int("num", 201)
    x = np.linspace(lo, hi, num)
    v, err, branch = ml_eval(alpha, beta, x)
    write_csv(args.out / "ml_table.csv", ["x", "value", "est_error", "branch"], zip(x, v.real, err, branch))
    results = criterion_1(cfg, None, args.out)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _write_field(path: Path, u, domain) -> None:
    from .acceptance import write_csv

    x, vals = u.with_boundary(domain)
    rows = ((x[i], t, vals[i, k]) for k, t in enumerate(u.times) for i in range(x.size))
    write_csv(path, ["x", "t", "u"], rows)


def cmd_solve(cfg, args) -> int:
    from .problem import discretize

    method = cfg.section("solver").get("method", "l1")
    disc = discretize(cfg.problem, cfg.n)
    u = _solve_with(method, cfg, disc, _grid(cfg))
    _write_field(args.out / "field.csv", u, cfg.problem.domain)
    print(f"solve: {method} on {u.nodes.size} nodes x {u.times.size} times -> {args.out / 'field.csv'}")
    return EXIT_OK


def cmd_crosscheck(cfg, args) -> int:
    import numpy as np

    from .acceptance import write_csv
    from .operator import l2_norm
    from .problem import discretize

    sec = cfg.section("crosscheck")
    methods = sec.get("solvers", ["l1", "laplace"])
    if not isinstance(methods, list) or len(methods) != 2:
        raise_config("crosscheck.solvers must name exactly two solvers")
    tolerance = sec.float("tolerance", 1e-3)
    disc = discretize(cfg.problem, cfg.n)
    grid = _grid(cfg)
    ua = _solve_with(methods[0], cfg, disc, grid)
    ub = _solve_with(methods[1], cfg, disc, grid)

    na = l2_norm(disc.h, ua.snapshots)
    nb = l2_norm(disc.h, ub.snapshots)
    nd = l2_norm(disc.h, ua.snapshots - ub.snapshots)
    rel = float(nd.max() / max(na.max(), nb.max()))
    write_csv(
        args.out / "delta.csv",
        ["t", f"norm_{methods[0]}", f"norm_{methods[1]}", "l2_diff", "max_node_diff"],
        zip(grid.times, na, nb, nd, np.max(np.abs(ua.values - ub.values), axis=0)),
    )
    ok = rel <= tolerance
    print(f"[{'PASS' if ok else 'FAIL'}] {methods[0]} vs {methods[1]} max relative L2 difference: {rel:.6e} (<= {tolerance:g})")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_asymptotics(cfg, args) -> int:
    import numpy as np

    from .acceptance import write_csv
    from .asymptotics import verify_theorem_asymp
    from .problem import discretize

    sec = cfg.section("asymptotics")
    t0 = sec.float("t_min", 1e2)
    t1 = sec.float("t_max", 1e4)
    t = np.logspace(np.log10(t0), np.log10(t1), sec.int("samples", 41))
    disc = discretize(cfg.problem, cfg.n)
    rep = verify_theorem_asymp(disc, t, window=(t0, t1))
    write_csv(
        args.out / "asymptotics.csv",
        ["t", "norm_u", "norm_u_minus_v", "norm_u_minus_ul"],
        zip(t, rep.norm_u, rep.norm_u_minus_v, rep.norm_u_minus_ul),
    )
    fits = [("u", rep.fit_u), ("u_minus_v", rep.fit_u_minus_v), ("u_minus_ul", rep.fit_u_minus_ul)]
    write_csv(
        args.out / "asymptotics_fit.csv",
        ["quantity", "slope", "intercept", "residual"],
        [[name, f.slope, f.intercept, f.residual] for name, f in fits],
    )
    for name, f in fits:
        print(f"slope of ||{name}||: {f.slope:.6f}")
    print(f"[{'PASS' if rep.passed else 'FAIL'}] decay rates (target -{rep.target_rate:g} for the differences)")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_invert(cfg, args) -> int:
    import warnings

    import numpy as np

    from .acceptance import write_csv
    from .errors import NonIdentificationWarning
    from .inverse import Observation, estimate_orders, point_sampler
    from .problem import discretize
    from .solvers import default_time_grid, l1_solve

    sec = cfg.section("inverse")
    x0 = sec.float("x0", "pi/2")
    T = sec.float("T", 10.0)
    K = sec.int("K", 1024)
    init = sec.floats("init", [0.7, 0.3])
    disc = discretize(cfg.problem, cfg.n)
    grid = default_time_grid(cfg.problem.orders.alphas, T, K)
    data = point_sampler(disc, x0)(l1_solve(disc, grid).snapshots)
    with warnings.catch_warnings():
        warnings.simplefilter("always", NonIdentificationWarning)
        est = estimate_orders(disc, Observation(x0, grid.times, data), init)

    true = np.asarray(cfg.problem.orders.alphas)
    got = np.asarray(est.orders.alphas)
    write_csv(
        args.out / "estimate.csv",
        ["j", "true_alpha", "initial_alpha", "estimated_alpha"],
        [[j + 1, true[j], init[j], got[j]] for j in range(true.size)],
    )
    write_csv(args.out / "observation.csv", ["t", "u_x0"], zip(grid.times, data))
    print(f"estimated orders {tuple(float(a) for a in got)} misfit {est.misfit:.3e} after {est.nfev} evaluations")
    return EXIT_OK if est.identified else EXIT_FAIL


def cmd_accept(cfg, args) -> int:
    from .acceptance import run_acceptance, run_criteria

    if args.only:
        results = run_criteria(cfg, args.seed, args.out, only=set(args.only), echo=print)
    else:
        results = run_acceptance(cfg, args.seed, args.out, echo=print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_FAIL


COMMANDS = {
    "ml-eval": cmd_ml_eval,
    "solve": cmd_solve,
    "crosscheck": cmd_crosscheck,
    "asymptotics": cmd_asymptotics,
    "invert": cmd_invert,
    "accept": cmd_accept,
}


# }}}


def raise_config(msg: str):
    from .config import ConfigError

    raise ConfigError(msg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    _set_threads(args.threads)

    import yaml

    from .config import benchmark_config, load_config
    from .errors import DegenerateOrdersError, DomainError, NumericError, SpecError

    try:
        cfg = benchmark_config() if args.config is None else load_config(args.config)
        if args.seed is None:
            seed = cfg.raw.get("seed", 0)
            if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
                raise_config(f"seed must be a non-negative integer, got {seed!r}")
            args.seed = seed
        elif args.seed < 0:
            raise_config(f"--seed must be non-negative, got {args.seed}")
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (SpecError, DomainError, DegenerateOrdersError, yaml.YAMLError, OSError) as exc:
        print(f"multifrac: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"multifrac: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        history = getattr(exc, "history", None)
        if history:
            print(f"multifrac: last residuals {history[-5:]}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
