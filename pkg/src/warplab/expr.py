"""Small arithmetic expression language used for custom warping functions
and custom chart maps.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Names are either variables supplied at evaluation time or the constants
``pi`` and ``e``.  Functions: sin, cos, sinh, cosh, exp, log.

Expressions evaluate over floats, numpy arrays, or :class:`Jet` values; the
latter carry first and second derivatives so a parsed warping function gets
exact derivatives without finite differences.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = ["Jet", "Expression", "parse", "ExpressionError"]


class ExpressionError(ValueError):
    pass


class Jet:
    """Truncated Taylor jet ``(f, f', f'')`` in one variable."""

    __slots__ = ("v", "d1", "d2")

    def __init__(self, v, d1=0.0, d2=0.0):
        self.v = v
        self.d1 = d1
        self.d2 = d2

    @classmethod
    def variable(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x, np.ones_like(x), np.zeros_like(x))

    @staticmethod
    def lift(x):
        return x if isinstance(x, Jet) else Jet(x, 0.0, 0.0)

    def __add__(self, o):
        o = Jet.lift(o)
        return Jet(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2)

    def __pos__(self):
        return self

    def __sub__(self, o):
        return self + (-Jet.lift(o))

    def __rsub__(self, o):
        return Jet.lift(o) - self

    def __mul__(self, o):
        o = Jet.lift(o)
        return Jet(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        )

    __rmul__ = __mul__

    def __truediv__(self, o):
        return self * Jet.lift(o)._reciprocal()

    def __rtruediv__(self, o):
        return Jet.lift(o) * self._reciprocal()

    def _reciprocal(self):
        inv = 1.0 / self.v
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def _chain(self, g0, g1, g2):
        # (g o f)' = g'(f) f',  (g o f)'' = g''(f) f'^2 + g'(f) f''
        return Jet(g0, g1 * self.d1, g2 * self.d1 * self.d1 + g1 * self.d2)

    def __pow__(self, o):
        if isinstance(o, Jet):
            if np.all(np.asarray(o.d1) == 0) and np.all(np.asarray(o.d2) == 0):
                o = o.v
            else:
                return _apply("exp", o * _apply("log", self))
        p = o
        v = self.v
        if p == 0:
            return Jet(np.ones_like(v) if isinstance(v, np.ndarray) else 1.0, 0.0, 0.0)
        if p == 1:
            return self
        if p == 2:
            return self._chain(v * v, 2.0 * v, 2.0)
        return self._chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def __rpow__(self, o):
        return _apply("exp", self * _apply("log", Jet.lift(o)))


def _apply(name, x):
    if not isinstance(x, Jet):
        return _PLAIN[name](x)
    v = x.v
    if name == "sin":
        s, c = np.sin(v), np.cos(v)
        return x._chain(s, c, -s)
    if name == "cos":
        s, c = np.sin(v), np.cos(v)
        return x._chain(c, -s, -c)
    if name == "sinh":
        s, c = np.sinh(v), np.cosh(v)
        return x._chain(s, c, s)
    if name == "cosh":
        s, c = np.sinh(v), np.cosh(v)
        return x._chain(c, s, c)
    if name == "exp":
        e = np.exp(v)
        return x._chain(e, e, e)
    if name == "log":
        return x._chain(np.log(v), 1.0 / v, -1.0 / (v * v))
    raise ExpressionError(f"unknown function {name!r}")


_PLAIN = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
    "log": np.log,
}
FUNCTIONS = frozenset(_PLAIN)
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos:].lstrip()[:1]!r} at column {pos + 1}")
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


# AST nodes are tuples: ("num", float) | ("var", name) | ("neg", node)
# | ("bin", op, left, right) | ("call", fname, node)


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            raise ExpressionError(f"expected {value!r} at column {pos + 1}, got {val or 'end of input'!r}")

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r} at column {pos + 1}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return ("neg", self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return ("bin", "^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return ("num", float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", val, arg)
            if val in self.variables:
                return ("var", val)
            if val in CONSTANTS:
                return ("num", CONSTANTS[val])
            raise ExpressionError(f"unknown name {val!r} at column {pos + 1}")
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected {val or 'end of input'!r} at column {pos + 1}")


def _eval(node, env):
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return env[node[1]]
    if tag == "neg":
        return -_eval(node[1], env)
    if tag == "call":
        return _apply(node[1], _eval(node[2], env))
    op, a, b = node[1], _eval(node[2], env), _eval(node[3], env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if isinstance(a, Jet) or isinstance(b, Jet):
        return Jet.lift(a) ** b
    return np.power(a, b) if isinstance(a, np.ndarray) else a**b


@dataclass(frozen=True)
class Expression:
    """A parsed expression bound to a fixed set of variable names."""

    text: str
    variables: tuple
    ast: tuple

    def __call__(self, **values):
        missing = set(self.variables) - set(values)
        if missing:
            raise ExpressionError(f"missing values for {sorted(missing)}")
        with np.errstate(all="ignore"):
            return _eval(self.ast, values)


def parse(text: str, variables=("r",)) -> Expression:
    """Parse ``text`` into an :class:`Expression` over ``variables``."""
    if not text or not text.strip():
        raise ExpressionError("empty expression")
    return Expression(text.strip(), tuple(variables), _Parser(text, set(variables)).parse())
