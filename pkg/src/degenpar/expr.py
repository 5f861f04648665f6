"""Small arithmetic-expression language for data functions ``f``, ``g``, ``psi`` in configs.

Grammar is Python's expression syntax restricted to numbers, the names ``t``,
``x1..xd`` and ``pi``, the operators ``+ - * / ^`` (``^`` is power) and the
functions ``exp log sqrt abs sin cos max min``. Evaluation is vectorised
over the rows of ``x``.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class ExpressionError(ValueError):
    def __init__(self, source: str, message: str, col: int | None = None):
        self.source = source
        self.col = col
        where = f" at column {col + 1}" if col is not None else ""
        super().__init__(f"{message}{where} in expression {source!r}")


def _nary(fn):
    def call(*args):
        if len(args) < 2:
            raise TypeError("needs at least two arguments")
        out = args[0]
        for a in args[1:]:
            out = fn(out, a)
        return out
    return call


FUNCTIONS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "sin": np.sin, "cos": np.cos,
    "max": _nary(np.maximum), "min": _nary(np.minimum),
}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide, ast.Pow: np.power}
_COORD = re.compile(r"x([1-9][0-9]*)$")


def _check(node, source: str, dim: int):
    if isinstance(node, ast.Expression):
        return _check(node.body, source, dim)
    col = getattr(node, "col_offset", None)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ExpressionError(source, f"unsupported literal {node.value!r}", col)
    elif isinstance(node, ast.Name):
        m = _COORD.match(node.id)
        if node.id not in ("t", "pi") and not (m and 1 <= int(m.group(1)) <= dim):
            raise ExpressionError(source, f"unknown name {node.id!r} (dimension {dim})", col)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(source, f"unsupported operator {type(node.op).__name__}", col)
        _check(node.left, source, dim)
        _check(node.right, source, dim)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ExpressionError(source, "unsupported unary operator", col)
        _check(node.operand, source, dim)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
            raise ExpressionError(source, "unsupported function call", col)
        if node.func.id in ("max", "min") and len(node.args) < 2:
            raise ExpressionError(source, f"{node.func.id} needs at least two arguments", col)
        if node.func.id not in ("max", "min") and len(node.args) != 1:
            raise ExpressionError(source, f"{node.func.id} takes one argument", col)
        for a in node.args:
            _check(a, source, dim)
    else:
        raise ExpressionError(source, f"unsupported syntax {type(node).__name__}", col)


def _eval(node, env):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    return FUNCTIONS[node.func.id](*(_eval(a, env) for a in node.args))


@dataclass(frozen=True)
class Expression:
    """Parsed expression; call as ``expr(t, x)`` with ``x`` of shape ``(n, dim)``."""

    source: str
    dim: int

    def __post_init__(self):
        parse(self.source, self.dim)

    def __call__(self, t, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"expression expects {self.dim} coordinates, got {x.shape[1]}")
        env = {"t": float(t), "pi": np.pi}
        env.update({f"x{k + 1}": x[:, k] for k in range(self.dim)})
        with np.errstate(all="ignore"):
            out = _eval(parse(self.source, self.dim).body, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],)).copy()


@lru_cache(maxsize=512)
def parse(source: str, dim: int) -> ast.Expression:
    if not isinstance(source, str):
        raise ExpressionError(str(source), "expression must be a string")
    try:
        tree = ast.parse(source.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(source, f"syntax error: {exc.msg}", (exc.offset or 1) - 1) from None
    _check(tree, source, dim)
    return tree


def compile_expression(source, dim: int) -> Expression:
    """Accepts a string or a bare number."""
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    return Expression(source, dim)
