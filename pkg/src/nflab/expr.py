"""Closed-form time expressions for coefficients and certificates.

The grammar is deliberately small: numeric constants, ``t``, ``pi``,
``+ - * / **``, and the unary functions ``sin``, ``cos``, ``exp``.
Anything else is rejected at parse time.
"""

from __future__ import annotations

import ast
from functools import cached_property

import numpy as np

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_NAMES = {"pi": np.pi}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARYOPS = (ast.UAdd, ast.USub)

# Gauss-Legendre panel rule used by ``integrate``.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_PANEL = 0.25


class ExpressionError(ValueError):
    pass


def _check(node: ast.AST, source: str) -> bool:
    """Validate ``node``; return True if it references ``t``."""
    if isinstance(node, ast.Expression):
        return _check(node.body, source)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric constant in {source!r}")
        return False
    if isinstance(node, ast.Name):
        if node.id == "t":
            return True
        if node.id in _NAMES:
            return False
        raise ExpressionError(f"unknown name {node.id!r} in {source!r}")
    if isinstance(node, ast.BinOp):
        if not isinstance(node.op, _BINOPS):
            raise ExpressionError(f"operator not allowed in {source!r}")
        left = _check(node.left, source)
        return _check(node.right, source) or left
    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _UNARYOPS):
            raise ExpressionError(f"operator not allowed in {source!r}")
        return _check(node.operand, source)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError(f"only sin, cos, exp may be called in {source!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"functions take one argument in {source!r}")
        return _check(node.args[0], source)
    raise ExpressionError(f"unsupported syntax in {source!r}")


class TimeExpression:
    """A parsed scalar function of time, vectorized over numpy arrays.

    >>> a = TimeExpression("2 + sin(t)")
    >>> float(a(0.0))
    2.0
    """

    def __init__(self, source: str | float | int):
        self.source = str(source).strip()
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.source!r}: {exc.msg}") from None
        self.depends_on_time = _check(tree, self.source)
        self._code = compile(tree, "<expr>", "eval")

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        env = {"__builtins__": {}, "t": t_arr, **_FUNCTIONS, **_NAMES}
        out = np.asarray(eval(self._code, env), dtype=float)  # noqa: S307 - validated AST
        if out.shape != t_arr.shape:
            out = np.broadcast_to(out, t_arr.shape).copy()
        return out if out.ndim else float(out)

    @property
    def is_constant(self) -> bool:
        return not self.depends_on_time

    @cached_property
    def constant_value(self) -> float:
        if not self.is_constant:
            raise ExpressionError(f"{self.source!r} depends on t")
        return float(self(0.0))

    def integrate(self, t1: float, t2: float) -> float:
        """Integral over ``[t1, t2]``; exact for constants, composite
        16-point Gauss-Legendre on panels of length <= 0.25 otherwise."""
        if t2 == t1:
            return 0.0
        if self.is_constant:
            return self.constant_value * (t2 - t1)
        return gauss_legendre(self, t1, t2)

    def __repr__(self) -> str:
        return f"TimeExpression({self.source!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, TimeExpression) and other.source == self.source

    def __hash__(self) -> int:
        return hash(self.source)


def gauss_legendre(fn, t1: float, t2: float, panel: float = _PANEL) -> float:
    """Composite Gauss-Legendre quadrature of a vectorized ``fn``."""
    n_panels = max(1, int(np.ceil(abs(t2 - t1) / panel)))
    edges = np.linspace(t1, t2, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(fn(nodes), dtype=float)
    return float(np.sum(half * (vals @ _GL_WEIGHTS)))


def as_expression(value) -> TimeExpression:
    if isinstance(value, TimeExpression):
        return value
    return TimeExpression(value)
