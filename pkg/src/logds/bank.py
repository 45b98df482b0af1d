"""Analytic test problems and the JSON problem-file format.

Problem files use the ``g(x) <= 0`` / ``h(x) = 0`` conventions; constraints
written as ``>=`` must be negated before they go into a file. Example::

    {
      "name": "hs12-like", "n": 2,
      "objective": "0.5*x1^2 + x2^2 - x1*x2 - 7*x1 - 7*x2",
      "ineq": ["4*x1^2 + x2^2 - 25"], "eq": [],
      "bounds": [[null, null], [null, null]],
      "x0": [0, 0],
      "known_f_star": -30, "known_x_star": [2, 3]
    }

``null`` bounds mean unbounded. ``linear`` is optional: ``{"A": [[...]], "b": [...]}``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .expr import CompiledExpr, ExprSyntaxError, max_var, parse_expr
from .merit import Problem, ProblemError

_num_or_null = {"type": ["number", "null"]}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["n", "objective", "x0"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "objective": {"type": "string"},
        "ineq": {"type": "array", "items": {"type": "string"}},
        "eq": {"type": "array", "items": {"type": "string"}},
        "bounds": {"type": "array",
                   "items": {"type": "array", "items": _num_or_null,
                             "minItems": 2, "maxItems": 2}},
        "linear": {
            "type": "object", "required": ["A", "b"], "additionalProperties": False,
            "properties": {
                "A": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                "b": {"type": "array", "items": {"type": "number"}},
            },
        },
        "x0": {"type": "array", "items": {"type": "number"}},
        "known_f_star": {"type": "number"},
        "known_x_star": {"type": "array", "items": {"type": "number"}},
    },
}


class ProblemFileError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _compile(src: str, n: int, where: str) -> CompiledExpr:
    try:
        ast = parse_expr(src, n)
    except ExprSyntaxError as exc:
        raise ProblemFileError(where, str(exc)) from exc
    return CompiledExpr(src, ast)


def problem_from_dict(data: dict) -> Problem:
    try:
        jsonschema.validate(data, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ProblemFileError(where, exc.message) from exc
    n = data["n"]
    if len(data["x0"]) != n:
        raise ProblemFileError("x0", f"length {len(data['x0'])} != n = {n}")
    objective = _compile(data["objective"], n, "objective")
    ineq = tuple(_compile(s, n, f"ineq/{i}") for i, s in enumerate(data.get("ineq", [])))
    eq = tuple(_compile(s, n, f"eq/{i}") for i, s in enumerate(data.get("eq", [])))
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    bounds = data.get("bounds")
    if bounds is not None:
        if len(bounds) != n:
            raise ProblemFileError("bounds", f"need {n} [lo, hi] pairs, got {len(bounds)}")
        for i, (lo, hi) in enumerate(bounds):
            lower[i] = -np.inf if lo is None else lo
            upper[i] = np.inf if hi is None else hi
    A = b = None
    if "linear" in data:
        A = np.array(data["linear"]["A"], dtype=float).reshape(-1, n) if data["linear"]["A"] \
            else np.zeros((0, n))
        b = np.array(data["linear"]["b"], dtype=float)
        if A.shape[0] != b.size:
            raise ProblemFileError("linear", "A and b row counts differ")
    try:
        return Problem(n, objective, np.array(data["x0"], float), ineq, eq, A, b, lower, upper,
                       name=data.get("name", "problem"),
                       known_f_star=data.get("known_f_star"),
                       known_x_star=data.get("known_x_star"))
    except ProblemError as exc:
        raise ProblemFileError("x0" if "x0" in str(exc) else "<root>", str(exc)) from exc


def load_problem(source) -> Problem:
    """Load from a path, a JSON string, or an already-parsed dict."""
    if isinstance(source, dict):
        return problem_from_dict(source)
    text = str(source)
    if not text.lstrip().startswith("{"):
        text = Path(source).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError("<root>", f"invalid JSON: {exc}") from exc
    return problem_from_dict(data)


# Analytic stand-ins with hand-verifiable optima (tests re-check each one).
BUILTINS: dict[str, dict] = {
    "hs12-like": {
        "n": 2,
        "objective": "0.5*x1^2 + x2^2 - x1*x2 - 7*x1 - 7*x2",
        "ineq": ["4*x1^2 + x2^2 - 25"],
        "x0": [0.0, 0.0],
        "known_f_star": -30.0, "known_x_star": [2.0, 3.0],
    },
    "hs21-like": {
        "n": 2,
        "objective": "0.01*x1^2 + x2^2 - 100",
        "bounds": [[2, 50], [-50, 50]],
        # 10 x1 - x2 >= 10, negated
        "linear": {"A": [[-10.0, 1.0]], "b": [-10.0]},
        "x0": [10.0, 5.0],
        "known_f_star": -99.96, "known_x_star": [2.0, 0.0],
    },
    "circle-eq": {
        "n": 2,
        "objective": "x1 + x2",
        "eq": ["x1^2 + x2^2 - 1"],
        "x0": [0.0, 0.0],
        "known_f_star": -math.sqrt(2.0),
        "known_x_star": [-math.sqrt(0.5), -math.sqrt(0.5)],
    },
    # g1 strictly satisfied at x0 (barrier), g2 violated at x0 (penalty)
    "mixed-split": {
        "n": 2,
        "objective": "(x1 - 2)^2 + (x2 - 1)^2",
        "ineq": ["x1^2 - x2", "x1 + x2 - 2"],
        "x0": [0.5, 2.0],
        "known_f_star": 1.0, "known_x_star": [1.0, 1.0],
    },
    "hs35-like": {
        "n": 3,
        "objective": "9 - 8*x1 - 6*x2 - 4*x3 + 2*x1^2 + 2*x2^2 + x3^2 + 2*x1*x2 + 2*x1*x3",
        "bounds": [[0, None], [0, None], [0, None]],
        "linear": {"A": [[1.0, 1.0, 2.0]], "b": [3.0]},
        "x0": [0.5, 0.5, 0.5],
        "known_f_star": 1.0 / 9.0, "known_x_star": [4.0 / 3.0, 7.0 / 9.0, 4.0 / 9.0],
    },
    # bound x2 <= 1 active at the optimum, one equality and one barrier inequality
    "eq-bound": {
        "n": 3,
        "objective": "(x1 - 1)^2 + (x2 - 2)^2 + x3^2",
        "ineq": ["x1^2 + x2^2 + x3^2 - 4"],
        "eq": ["x1 + x3 - 1"],
        "bounds": [[-2, 2], [-2, 1], [-2, 2]],
        "x0": [0.0, 0.0, 0.0],
        "known_f_star": 1.0, "known_x_star": [1.0, 1.0, 0.0],
    },
}


def builtin_names() -> list[str]:
    return list(BUILTINS)


def get_builtin(name: str) -> Problem:
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin problem {name!r}; choose from {', '.join(BUILTINS)}")
    return problem_from_dict({"name": name, **BUILTINS[name]})


def builtin_suite() -> list[tuple[Problem, float]]:
    return [(p, p.known_f_star) for p in map(get_builtin, BUILTINS)]
