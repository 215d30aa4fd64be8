"""Experiment configuration.

Configurations are YAML files.  Coefficients are either arithmetic
expressions in ``x`` (``+ - * / ^``, ``sin``, ``cos``, ``exp``, constants
``pi`` and ``e``) or tables ``{x: [...], values: [...]}`` interpolated
linearly.
"""

from __future__ import annotations

import ast
import math
import operator as op
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from .errors import SpecError
from .problem import OrderSet, ProblemSpec


class ConfigError(SpecError):
    """The configuration file violates a documented invariant."""


# {{{ expressions

_BINOPS = {ast.Add: op.add, ast.Sub: op.sub, ast.Mult: op.mul, ast.Div: op.truediv, ast.Pow: op.pow}
_UNARY = {ast.USub: op.neg, ast.UAdd: op.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": math.pi, "e": math.e}


def _compile(node: ast.AST, source: str) -> Callable[[np.ndarray], Any]:
    if isinstance(node, ast.Expression):
        return _compile(node.body, source)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        v = float(node.value)
        return lambda x: v
    if isinstance(node, ast.Name):
        if node.id == "x":
            return lambda x: x
        if node.id in _CONSTS:
            v = _CONSTS[node.id]
            return lambda x: v
        raise ConfigError(f"unknown identifier {node.id!r} in expression {source!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        f, lhs, rhs = _BINOPS[type(node.op)], _compile(node.left, source), _compile(node.right, source)
        return lambda x: f(lhs(x), rhs(x))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        f, arg = _UNARY[type(node.op)], _compile(node.operand, source)
        return lambda x: f(arg(x))
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id in _FUNCS
        and len(node.args) == 1
        and not node.keywords
    ):
        f, arg = _FUNCS[node.func.id], _compile(node.args[0], source)
        return lambda x: f(arg(x))
    raise ConfigError(f"unsupported construct {type(node).__name__} in expression {source!r}")


def parse_expression(source: str | int | float) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an arithmetic expression in ``x`` into a vectorized function."""
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    if not isinstance(source, str):
        raise ConfigError(f"expected an expression string, got {source!r}")
    try:
        tree = ast.parse(source.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {source!r}: {exc.msg}") from exc
    fn = _compile(tree, source)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape).copy()

    return evaluate


def parse_scalar(value) -> float:
    """A number or a constant expression (e.g. ``"pi/2"``)."""
    v = float(parse_expression(value)(np.zeros(1))[0])
    if not math.isfinite(v):
        raise ConfigError(f"non-finite value {value!r}")
    return v


def parse_coefficient(value, name: str):
    if isinstance(value, dict):
        if set(value) != {"x", "values"}:
            raise ConfigError(f"tabulated coefficient {name!r} needs exactly the keys 'x' and 'values'")
        xs = np.asarray([parse_scalar(v) for v in value["x"]])
        ys = np.asarray(value["values"], dtype=float)
        if xs.shape != ys.shape or xs.size < 2 or np.any(np.diff(xs) <= 0.0):
            raise ConfigError(f"tabulated coefficient {name!r} needs increasing x and matching values")
        return lambda x: np.interp(x, xs, ys)
    try:
        return parse_expression(value)
    except ConfigError as exc:
        raise ConfigError(f"coefficient {name!r}: {exc}") from exc


# }}}


@dataclass(frozen=True)
class Section:
    """Read-only view of a config mapping with typed getters."""

    name: str
    data: dict

    def get(self, key: str, default=None):
        return self.data.get(key, default)

    def float(self, key: str, default=None) -> float:
        v = self.data.get(key, default)
        if v is None:
            raise ConfigError(f"{self.name}.{key} is required")
        return parse_scalar(v)

    def int(self, key: str, default=None) -> int:
        v = self.data.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{self.name}.{key} must be an integer, got {v!r}")
        return v

    def floats(self, key: str, default=None) -> tuple[float, ...]:
        v = self.data.get(key, default)
        if not isinstance(v, (list, tuple)):
            raise ConfigError(f"{self.name}.{key} must be a list")
        return tuple(parse_scalar(x) for x in v)

    def sub(self, key: str) -> Section:
        v = self.data.get(key) or {}
        if not isinstance(v, dict):
            raise ConfigError(f"{self.name}.{key} must be a mapping")
        return Section(f"{self.name}.{key}", v)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    n: int
    raw: dict = field(repr=False)
    source: Path | None = None

    def section(self, name: str) -> Section:
        return Section(name, self.raw.get(name) or {})


def build_problem(section: Section) -> ProblemSpec:
    domain = section.floats("domain", [0, "pi"])
    if len(domain) != 2 or not domain[0] < domain[1]:
        raise ConfigError(f"problem.domain must be [lo, hi] with lo < hi, got {domain}")
    try:
        orders = OrderSet(section.floats("orders"))
    except SpecError as exc:
        raise ConfigError(f"problem.orders: {exc}") from exc
    weights = section.get("weights")
    if weights is None:
        weights = [1] * len(orders)
    if not isinstance(weights, list) or len(weights) != len(orders):
        raise ConfigError(f"problem.weights must list one weight per order ({len(orders)})")
    potential = section.get("potential")
    convection = section.get("convection")
    return ProblemSpec(
        orders=orders,
        weights=[parse_coefficient(w, f"weights[{j}]") for j, w in enumerate(weights)],
        initial=parse_coefficient(section.get("initial", "sin(x)"), "initial"),
        domain=(domain[0], domain[1]),
        diffusion=parse_coefficient(section.get("diffusion", 1), "diffusion"),
        potential=None if potential is None else parse_coefficient(potential, "potential"),
        convection=None if convection is None else parse_coefficient(convection, "convection"),
    )


def load_config(source: str | Path | dict) -> ExperimentConfig:
    """Parse and validate a configuration file (or an already-loaded mapping)."""
    path = None
    if isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"configuration file {path} does not exist")
        try:
            raw = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed configuration {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("the configuration must be a mapping")
    if "problem" not in raw:
        raise ConfigError("the configuration needs a 'problem' section")

    problem = build_problem(Section("problem", raw["problem"] or {}))
    n = Section("discretization", raw.get("discretization") or {}).int("n", 256)
    if n < 3:
        raise ConfigError(f"discretization.n must be at least 3, got {n}")

    # fail fast on coefficient errors by sampling once
    from .problem import discretize

    try:
        discretize(problem, n)
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(problem, n, raw, path)


BENCHMARK = {
    "problem": {
        "domain": [0, "pi"],
        "orders": [0.8, 0.4],
        "weights": ["1", "1 + x*(pi - x)/4"],
        "initial": "sin(x)",
        "diffusion": "1",
    },
    "discretization": {"n": 256},
    "seed": 0,
}


def benchmark_config() -> ExperimentConfig:
    """The two-term benchmark problem used throughout the acceptance suite."""
    return load_config(BENCHMARK)
