"""Multi-term time-fractional diffusion: forward solvers, long-time asymptotics
and recovery of the fractional orders.

Submodules are imported on first attribute access so that ``multifrac.cli``
can configure BLAS threading before numpy is loaded.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "special": ["MLParams", "EvalResult", "Branch", "ml_eval", "mlf", "mittag_leffler", "gamma",
                "ml_sector_bound_check", "complete_monotonicity_check"],
    "problem": ["OrderSet", "ProblemSpec", "Grid1D", "Discretization", "discretize"],
    "operator": ["EigenBasis", "eigendecompose", "frac_power_apply", "sobolev_norm", "solution_operator",
                 "solve_shifted", "l2_norm", "h2_norm"],
    "fractional": ["TimeGrid", "rl_weights", "rl_integral", "l1_weights", "caputo_l1", "power_rule",
                   "caputo_roundtrip_check"],
    "solvers": ["Field", "ContourSpec", "spectral_single_term", "spectral_field", "l1_solve", "laplace_solve",
                "picard_solve", "integral_equation_residual", "default_time_grid"],
    "asymptotics": ["DecayFit", "fit_decay", "leading_term", "single_term_reference", "verify_theorem_asymp"],
    "inverse": ["Observation", "observation_laplace", "discriminator", "q1_weight", "reference_w0",
                "estimate_orders", "point_sampler"],
    "config": ["ConfigError", "ExperimentConfig", "load_config", "benchmark_config"],
    "errors": ["MultifracError", "DomainError", "SpecError", "NumericError", "AccuracyError",
               "NonConvergenceError", "ContourResolutionError", "TailError", "DegenerateOrdersError",
               "NonIdentificationWarning"],
}
_LOOKUP = {name: mod for mod, names in _EXPORTS.items() for name in names}

__all__ = sorted(_LOOKUP)


def __getattr__(name: str):
    mod = _LOOKUP.get(name)
    if mod is None:
        raise AttributeError(f"module 'multifrac' has no attribute {name!r}")
    value = getattr(importlib.import_module(f".{mod}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(__all__))
