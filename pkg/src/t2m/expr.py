"""A small arithmetic expression language compiled to hyper-dual-aware closures.

Grammar: numbers, variable names, ``+ - * / ^`` (``**`` also accepted),
parentheses and the functions ``sin cos tan exp log sqrt atan atan2``.
The constants ``pi`` and ``e`` are predefined.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Callable, Mapping, Sequence

from . import hyperdual as hd
from .errors import ConfigError

FUNCTIONS: dict[str, Callable] = {
    "sin": hd.sin,
    "cos": hd.cos,
    "tan": hd.tan,
    "exp": hd.exp,
    "log": hd.log,
    "sqrt": hd.sqrt,
    "atan": hd.atan,
    "atan2": hd.atan2,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}

Env = Mapping[str, object]


class ExpressionError(ConfigError):
    pass


def _fail(msg: str, text: str, node: ast.AST | None = None) -> ExpressionError:
    col = getattr(node, "col_offset", None)
    err = ExpressionError(f"{msg} in expression {text!r}" + (f" at column {col + 1}" if col is not None else ""))
    err.column = None if col is None else col + 1
    return err


def _build(node: ast.AST, text: str, names: frozenset[str]) -> Callable[[Env], object]:
    if isinstance(node, ast.Expression):
        return _build(node.body, text, names)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise _fail(f"unsupported literal {node.value!r}", text, node)
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        name = node.id
        if name in CONSTANTS:
            value = CONSTANTS[name]
            return lambda env: value
        if name not in names:
            raise _fail(f"unknown variable {name!r}", text, node)
        return lambda env: env[name]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _build(node.operand, text, names)
        if isinstance(node.op, ast.USub):
            return lambda env: -inner(env)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left = _build(node.left, text, names)
        right = _build(node.right, text, names)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
            raise _fail("unsupported function call", text, node)
        fn = FUNCTIONS[node.func.id]
        args = [_build(a, text, names) for a in node.args]
        expected = 2 if node.func.id == "atan2" else 1
        if len(args) != expected:
            raise _fail(f"{node.func.id} takes {expected} argument(s)", text, node)
        return lambda env: fn(*(a(env) for a in args))
    raise _fail(f"unsupported syntax {type(node).__name__}", text, node)


def compile_expression(text: str, names: Sequence[str]) -> Callable[[Env], object]:
    """Compile ``text`` into ``env -> value`` over the given variable names."""
    if not isinstance(text, str):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            value = float(text)
            return lambda env: value
        raise ExpressionError(f"expected an expression string, got {text!r}")
    source = text.replace("^", "**")
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        err = ExpressionError(f"syntax error in expression {text!r}" + (f" at column {exc.offset}" if exc.offset else ""))
        err.column = exc.offset
        raise err from None
    return _build(tree, text, frozenset(names))


class Program:
    """Helper definitions (``let``) followed by output expressions.

    ``let`` entries look like ``"s = y1^2 + y2^2"`` and may use earlier ones.
    """

    def __init__(self, outputs: Sequence[str], names: Sequence[str], lets: Sequence[str] = ()):
        self.names = list(names)
        self.lets: list[tuple[str, Callable]] = []
        known = list(names)
        for line in lets:
            if "=" not in line:
                raise ExpressionError(f"let entry {line!r} needs the form 'name = expression'")
            lhs, rhs = (s.strip() for s in line.split("=", 1))
            if not lhs.isidentifier() or lhs in FUNCTIONS or lhs in CONSTANTS:
                raise ExpressionError(f"invalid helper name {lhs!r}")
            self.lets.append((lhs, compile_expression(rhs, known)))
            known.append(lhs)
        self.outputs = [compile_expression(o, known) for o in outputs]
        self.texts = list(outputs)

    def __call__(self, values: Sequence) -> list:
        env = dict(zip(self.names, values))
        for name, fn in self.lets:
            env[name] = fn(env)
        return [fn(env) for fn in self.outputs]


def coordinate_names(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{k}" for k in range(1, n + 1)]
