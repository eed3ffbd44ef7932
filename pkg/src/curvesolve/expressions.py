"""Small arithmetic expression language for scenario files.

Expressions such as ``2/x0^2*(1+0.05*cos(theta))`` are validated against a
whitelist of syntax nodes and functions and then compiled into vectorized
numpy callables.  Everything stays analytic, so the compiled callables accept
complex arguments (the Jacobian assembly relies on complex-step derivatives).
"""
from __future__ import annotations

import ast
from typing import Iterable

import numpy as np
import sympy

from .errors import ScenarioParseError


def _cot(x):
    return 1.0 / np.tan(x)


def _coth(x):
    return 1.0 / np.tanh(x)


FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "cot": _cot,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "coth": _coth,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
# "E" is how sympy prints Euler's number in derivatives
CONSTANTS = {"pi": np.pi, "e": np.e, "E": np.e}

_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


class Expression:
    """A validated expression in a fixed set of variables.

    >>> f = Expression("2/x0^2", ["x0"])
    >>> float(f(x0=2.0))
    0.5
    """

    def __init__(self, text: str, variables: Iterable[str]):
        self.text = str(text).strip()
        self.variables = tuple(variables)
        if not self.text:
            raise ScenarioParseError("empty expression")
        source = self.text.replace("^", "**")
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ScenarioParseError(f"cannot parse expression {self.text!r}: {exc.msg}") from None
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED_NODES):
                raise ScenarioParseError(
                    f"disallowed syntax {type(node).__name__} in {self.text!r}")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ScenarioParseError(f"non-numeric literal in {self.text!r}")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                    raise ScenarioParseError(f"unknown function in {self.text!r}")
                if len(node.args) != 1 or node.keywords:
                    raise ScenarioParseError(f"functions take one argument: {self.text!r}")
            if isinstance(node, ast.Name) and not isinstance(getattr(node, "ctx", None), ast.Load):
                raise ScenarioParseError(f"bad name usage in {self.text!r}")
        names = {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)}
        unknown = names - set(FUNCTIONS) - set(CONSTANTS) - set(self.variables)
        if unknown:
            raise ScenarioParseError(
                f"unknown variable(s) {sorted(unknown)} in {self.text!r}; "
                f"allowed: {list(self.variables)}")
        self._source = source
        self._code = compile(tree, "<expression>", "eval")
        self._namespace = {"__builtins__": {}, **FUNCTIONS, **CONSTANTS}

    def __call__(self, **values):
        env = dict(self._namespace)
        env.update(values)
        out = np.asarray(eval(self._code, env)) * 1.0  # noqa: S307 - tree validated above
        if not values:
            return out
        shape = np.broadcast_shapes(*(np.shape(v) for v in values.values()))
        # constant expressions still come back with the shape of the inputs
        return np.array(np.broadcast_to(out, shape))

    def depends_on(self, name: str) -> bool:
        return name in {n.id for n in ast.walk(ast.parse(self._source, mode="eval"))
                        if isinstance(n, ast.Name)}

    def derivative(self, name: str) -> "Expression":
        """Symbolic derivative with respect to one variable."""
        local = {v: sympy.Symbol(v) for v in self.variables}
        local.update({"cot": sympy.cot, "coth": sympy.coth, "pi": sympy.pi, "e": sympy.E})
        expr = sympy.sympify(self._source, locals=local)
        d = sympy.diff(expr, local[name])
        return Expression(sympy.sstr(d), self.variables)

    def __repr__(self) -> str:
        return f"Expression({self.text!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Expression) and (self.text, self.variables) == (other.text, other.variables)

    def __hash__(self) -> int:
        return hash((self.text, self.variables))
