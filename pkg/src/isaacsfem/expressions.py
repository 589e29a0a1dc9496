"""Safe arithmetic expressions for user-supplied coefficients.

Expressions are parsed with ast and restricted to arithmetic operators, a
small function whitelist, and the variables x, y, t, alpha, beta (plus the
constants pi and T).  Everything evaluates through numpy, so compiled
expressions are vectorized over point arrays.
"""

from __future__ import annotations

import ast
from typing import Callable, Mapping

import numpy as np

from .errors import ParameterError

__all__ = ["compile_expression", "ALLOWED_FUNCTIONS", "ALLOWED_VARIABLES"]

ALLOWED_FUNCTIONS: Mapping[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
    "atan2": np.arctan2,
}

ALLOWED_VARIABLES = ("x", "y", "t", "alpha", "beta")

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
    ast.Mod: np.mod,
}
_UNARY = {ast.USub: np.negative, ast.UAdd: lambda v: v}


def _check(node: ast.AST, constants: Mapping[str, float]):
    if isinstance(node, ast.Expression):
        _check(node.body, constants)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ParameterError(
                f"operator {type(node.op).__name__} is not allowed in expressions"
            )
        _check(node.left, constants)
        _check(node.right, constants)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ParameterError(
                f"operator {type(node.op).__name__} is not allowed in expressions"
            )
        _check(node.operand, constants)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in ALLOWED_FUNCTIONS:
            name = getattr(getattr(node, "func", None), "id", "<expression>")
            raise ParameterError(f"function {name!r} is not allowed in expressions")
        if node.keywords:
            raise ParameterError("keyword arguments are not allowed in expressions")
        min_args = 2 if node.func.id in ("min", "max", "atan2") else 1
        if len(node.args) < min_args:
            raise ParameterError(
                f"function {node.func.id!r} needs at least {min_args} argument(s)"
            )
        if node.func.id not in ("min", "max") and len(node.args) > min_args:
            raise ParameterError(f"too many arguments to {node.func.id!r}")
        for arg in node.args:
            _check(arg, constants)
    elif isinstance(node, ast.Name):
        if node.id not in ALLOWED_VARIABLES and node.id not in constants:
            raise ParameterError(f"unknown name {node.id!r} in expression")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ParameterError(f"constant {node.value!r} is not numeric")
    else:
        raise ParameterError(
            f"syntax {type(node).__name__} is not allowed in expressions"
        )


def _evaluate(node: ast.AST, env: Mapping[str, object]):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, env)
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](
            _evaluate(node.left, env), _evaluate(node.right, env)
        )
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_evaluate(node.operand, env))
    if isinstance(node, ast.Call):
        fn = ALLOWED_FUNCTIONS[node.func.id]
        args = [_evaluate(a, env) for a in node.args]
        if node.func.id in ("min", "max") and len(args) > 2:
            out = args[0]
            for a in args[1:]:
                out = fn(out, a)
            return out
        return fn(*args)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.Constant):
        return node.value
    raise ParameterError(f"cannot evaluate {type(node).__name__}")


def compile_expression(
    text: str, constants: Mapping[str, float] | None = None
) -> Callable:
    """Compile text into f(x, y, t, alpha, beta) -> array.

    constants adds extra read-only names (pi is always available).
    """
    consts = {"pi": np.pi}
    if constants:
        consts.update(constants)
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ParameterError(f"cannot parse expression {text!r}: {exc.msg}") from exc
    _check(tree, consts)

    def fn(x, y, t=0.0, alpha=0.0, beta=0.0):
        env = dict(consts)
        env.update({"x": x, "y": y, "t": t, "alpha": alpha, "beta": beta})
        out = _evaluate(tree, env)
        return np.asarray(out, dtype=float)

    return fn
