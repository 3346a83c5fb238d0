"""Prefix (s-expression) syntax for residuals and known source functions.

Residuals::

    (- (d t u) (* alpha (+ (d x x u) (d y y u))))
    (+ (dt u) (* u (dx u)) (* -1 nu (dxx u)))

``u`` is the surrogate.  ``(d v1 v2 ... u)`` differentiates it with respect
to the listed variables; ``(dxx u)`` is shorthand when every variable name
is a single character.  Operators: ``+``, ``-`` (unary or n-ary), ``*``,
``/`` (by a surrogate-free divisor), ``^`` (integer power).  Other atoms are
numbers, ``pi``, variable names (coordinates), parameter names (constants)
and source names (known functions of the point).

Source functions use the same syntax without ``u`` and additionally allow
``sin cos tan exp log sqrt abs tanh sinh cosh``.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .expr import (Constant, Coordinate, MalformedExpression, Negate, Node, Power,
                   Product, SourceTerm, Sum, SurrogateTerm, degree)

_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "sinh": np.sinh, "cosh": np.cosh,
}


def tokenize(text: str) -> list:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise MalformedExpression(f"cannot tokenize near {text[pos:pos + 20]!r}")
        out.append(m.group(1) or m.group(2) or m.group(3))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


def read_sexpr(text: str):
    """Nested lists of atom strings."""
    tokens = tokenize(text)
    if not tokens:
        raise MalformedExpression("empty expression")

    def read(i):
        tok = tokens[i]
        if tok == "(":
            lst, i = [], i + 1
            while i < len(tokens) and tokens[i] != ")":
                item, i = read(i)
                lst.append(item)
            if i >= len(tokens):
                raise MalformedExpression("unbalanced parentheses")
            if not lst:
                raise MalformedExpression("empty list")
            return lst, i + 1
        if tok == ")":
            raise MalformedExpression("unexpected ')'")
        return tok, i + 1

    tree, end = read(0)
    if end != len(tokens):
        raise MalformedExpression("trailing tokens after expression")
    return tree


def _number(tok):
    try:
        return float(tok)
    except ValueError:
        return None


class ResidualParser:
    """Builds constraint trees for a fixed variable list."""

    def __init__(self, variables, parameters=None, sources=None):
        self.variables = list(variables)
        self.var_index = {v: i for i, v in enumerate(self.variables)}
        self.parameters = dict(parameters or {})
        self.sources = dict(sources or {})
        clash = set(self.var_index) & (set(self.parameters) | set(self.sources))
        clash |= set(self.parameters) & set(self.sources)
        if clash:
            raise MalformedExpression(f"names used more than once: {sorted(clash)}")

    def parse(self, text: str) -> Node:
        return self._build(read_sexpr(text))

    def _derivative_vars(self, head: str):
        if head == "d" or not head.startswith("d") or head in self.var_index:
            return None
        letters = list(head[1:])
        if letters and all(ch in self.var_index for ch in letters):
            return letters
        return None

    def _surrogate(self, names) -> SurrogateTerm:
        orders = [0] * len(self.variables)
        for n in names:
            if n not in self.var_index:
                raise MalformedExpression(f"unknown variable {n!r} in derivative")
            orders[self.var_index[n]] += 1
        return SurrogateTerm(tuple(orders))

    def _atom(self, tok: str) -> Node:
        num = _number(tok)
        if num is not None:
            return Constant(num)
        if tok == "u":
            return SurrogateTerm((0,) * len(self.variables))
        if tok == "pi":
            return Constant(math.pi)
        if tok in self.var_index:
            return Coordinate(self.var_index[tok])
        if tok in self.parameters:
            return Constant(float(self.parameters[tok]))
        if tok in self.sources:
            return SourceTerm(tok, self.sources[tok])
        raise MalformedExpression(f"unknown symbol {tok!r}")

    def _build(self, sx) -> Node:
        if isinstance(sx, str):
            return self._atom(sx)
        head, args = sx[0], sx[1:]
        if not isinstance(head, str):
            raise MalformedExpression("operator position must hold a symbol")
        if head == "d" or self._derivative_vars(head) is not None:
            names = args[:-1] if head == "d" else self._derivative_vars(head)
            target = args[-1] if args else None
            if target != "u" or (head != "d" and len(args) != 1):
                raise MalformedExpression("derivatives apply to the surrogate 'u' only")
            if head == "d" and not all(isinstance(n, str) for n in names):
                raise MalformedExpression("derivative variables must be names")
            return self._surrogate(names)
        kids = [self._build(a) for a in args]
        if head == "+":
            return Sum(tuple(kids)) if len(kids) > 1 else self._one(kids, head)
        if head == "-":
            if len(kids) == 1:
                return Negate(kids[0])
            if not kids:
                raise MalformedExpression("'-' needs operands")
            return Sum((kids[0],) + tuple(Negate(k) for k in kids[1:]))
        if head == "*":
            return Product(tuple(kids)) if len(kids) > 1 else self._one(kids, head)
        if head == "/":
            if len(kids) != 2 or degree(kids[1]) != 0:
                raise MalformedExpression("'/' takes two operands and a surrogate-free divisor")
            den = kids[1]
            if isinstance(den, Constant):
                return Product((kids[0], Constant(1.0 / den.value)))
            src = _compile_source(den)
            return Product((kids[0], SourceTerm(f"1/{id(den)}", lambda X, f=src: 1.0 / f(X))))
        if head == "^":
            if len(kids) != 2 or not isinstance(kids[1], Constant):
                raise MalformedExpression("'^' takes a base and a constant integer exponent")
            k = kids[1].value
            if k != int(k) or k < 1:
                raise MalformedExpression("exponent must be an integer >= 1")
            return Power(kids[0], int(k))
        raise MalformedExpression(f"unknown operator {head!r}")

    @staticmethod
    def _one(kids, head):
        if len(kids) != 1:
            raise MalformedExpression(f"{head!r} needs operands")
        return kids[0]


def _compile_source(node: Node):
    """Turn a surrogate-free tree into a vectorized function of X."""
    if isinstance(node, Constant):
        return lambda X, c=node.value: np.full(X.shape[0], c)
    if isinstance(node, Coordinate):
        return lambda X, d=node.dim: X[:, d]
    if isinstance(node, SourceTerm):
        return node
    if isinstance(node, Negate):
        f = _compile_source(node.child)
        return lambda X: -f(X)
    if isinstance(node, Sum):
        fs = [_compile_source(c) for c in node.children]
        return lambda X: sum(f(X) for f in fs)
    if isinstance(node, Product):
        fs = [_compile_source(c) for c in node.children]

        def prod(X):
            out = np.ones(X.shape[0])
            for f in fs:
                out = out * f(X)
            return out
        return prod
    if isinstance(node, Power):
        f = _compile_source(node.child)
        return lambda X, k=node.exponent: f(X) ** k
    raise MalformedExpression(f"cannot use {node!r} in a source function")


def parse_source(text: str, variables, parameters=None, sources=None):
    """Compile a known function of the input point from prefix syntax."""
    var_index = {v: i for i, v in enumerate(variables)}
    parameters = dict(parameters or {})
    sources = dict(sources or {})

    def build(sx):
        if isinstance(sx, str):
            num = _number(sx)
            if num is not None:
                return lambda X, c=num: np.full(X.shape[0], c)
            if sx == "pi":
                return lambda X: np.full(X.shape[0], math.pi)
            if sx in var_index:
                return lambda X, d=var_index[sx]: X[:, d]
            if sx in parameters:
                return lambda X, c=float(parameters[sx]): np.full(X.shape[0], c)
            if sx in sources:
                return sources[sx]
            if sx == "u":
                raise MalformedExpression("source functions cannot reference the surrogate")
            raise MalformedExpression(f"unknown symbol {sx!r}")
        head, args = sx[0], sx[1:]
        fs = [build(a) for a in args]
        if head in _FUNCS:
            if len(fs) != 1:
                raise MalformedExpression(f"{head} takes one argument")
            g = _FUNCS[head]
            return lambda X, f=fs[0]: g(f(X))
        if not fs:
            raise MalformedExpression(f"{head!r} needs operands")
        if head == "+":
            return lambda X: sum(f(X) for f in fs)
        if head == "-":
            if len(fs) == 1:
                return lambda X: -fs[0](X)
            return lambda X: fs[0](X) - sum(f(X) for f in fs[1:])
        if head == "*":
            def prod(X):
                out = np.ones(X.shape[0])
                for f in fs:
                    out = out * f(X)
                return out
            return prod
        if head == "/" and len(fs) == 2:
            return lambda X: fs[0](X) / fs[1](X)
        if head == "^" and len(fs) == 2:
            return lambda X: fs[0](X) ** fs[1](X)
        raise MalformedExpression(f"unknown operator {head!r}")

    return build(read_sexpr(text))
