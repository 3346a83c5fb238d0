"""Constraint expression trees over the surrogate and its derivatives.

Trees are polynomial in the surrogate (sums, products, integer powers), so
residual gradients with respect to the coefficients are exact.  Evaluation
is batched over collocation points: a :class:`CompiledResidual` tabulates
the basis once for its point set and then evaluates values, Jacobians and
vector-Jacobian products for any coefficient vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..basis import BasisTables

MAX_NODES = 10_000
MAX_DEPTH = 64


class MalformedExpression(ValueError):
    pass


class Node:
    __slots__ = ()


@dataclass(frozen=True)
class SurrogateTerm(Node):
    """Partial derivative of the surrogate; ``orders`` has one entry per dimension."""

    orders: tuple


@dataclass(frozen=True)
class Coordinate(Node):
    dim: int


@dataclass(frozen=True)
class Constant(Node):
    value: float


@dataclass(frozen=True)
class SourceTerm(Node):
    """Named known function of the input point, e.g. a forcing or target."""

    name: str
    func: Callable = None

    def __call__(self, X):
        return np.broadcast_to(np.asarray(self.func(X), dtype=np.float64), (X.shape[0],))


@dataclass(frozen=True)
class Sum(Node):
    children: tuple


@dataclass(frozen=True)
class Product(Node):
    children: tuple


@dataclass(frozen=True)
class Power(Node):
    child: Node
    exponent: int


@dataclass(frozen=True)
class Negate(Node):
    child: Node


def children(node: Node) -> tuple:
    if isinstance(node, (Sum, Product)):
        return node.children
    if isinstance(node, (Power, Negate)):
        return (node.child,)
    return ()


def validate(node: Node, dims: int, max_nodes: int = MAX_NODES, max_depth: int = MAX_DEPTH):
    """Check structure and dimensionality; raises :class:`MalformedExpression`."""
    count = 0
    stack = [(node, 1)]
    while stack:
        n, depth = stack.pop()
        count += 1
        if count > max_nodes or depth > max_depth:
            raise MalformedExpression("expression exceeds size limits")
        if isinstance(n, SurrogateTerm):
            if len(n.orders) != dims or any(int(o) < 0 for o in n.orders):
                raise MalformedExpression(f"derivative orders {n.orders} invalid for {dims} dimensions")
        elif isinstance(n, Coordinate):
            if not 0 <= n.dim < dims:
                raise MalformedExpression(f"coordinate index {n.dim} out of range")
        elif isinstance(n, Constant):
            if not np.isfinite(n.value):
                raise MalformedExpression("non-finite constant")
        elif isinstance(n, SourceTerm):
            if n.func is None:
                raise MalformedExpression(f"source {n.name!r} has no function bound")
        elif isinstance(n, (Sum, Product)):
            if not n.children:
                raise MalformedExpression(f"empty {type(n).__name__}")
        elif isinstance(n, Power):
            if int(n.exponent) != n.exponent or n.exponent < 1:
                raise MalformedExpression("powers must be integers >= 1")
        elif not isinstance(n, Negate):
            raise MalformedExpression(f"unknown node {n!r}")
        stack.extend((c, depth + 1) for c in children(n))


def degree(node: Node) -> int:
    """Polynomial degree of the tree in the surrogate coefficients."""
    if isinstance(node, SurrogateTerm):
        return 1
    if isinstance(node, Sum):
        return max(degree(c) for c in node.children)
    if isinstance(node, Product):
        return sum(degree(c) for c in node.children)
    if isinstance(node, Power):
        return node.exponent * degree(node.child)
    if isinstance(node, Negate):
        return degree(node.child)
    return 0


def surrogate_orders(node: Node) -> set:
    out = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, SurrogateTerm):
            out.add(tuple(int(o) for o in n.orders))
        stack.extend(children(n))
    return out


def max_order(node: Node) -> int:
    return max((max(o) for o in surrogate_orders(node) if o), default=0)


class CompiledResidual:
    """A residual expression bound to a basis and a fixed point set."""

    def __init__(self, expr: Node, indices, scaling, X, tables: BasisTables | None = None):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        validate(expr, scaling.dims)
        self.expr = expr
        self.X = X
        self.n_points = X.shape[0]
        self.n_coef = len(indices)
        orders = surrogate_orders(expr)
        if tables is None:
            tables = BasisTables(indices, scaling, X, max((max(o) for o in orders), default=0))
        self._mats = {o: tables.matrix(o) for o in sorted(orders)}
        self._leaf = {}
        self.degree = degree(expr)
        self._linear = None
        if self.degree <= 1:
            val0, jac = self._forward(expr, np.zeros(self.n_coef))
            self._linear = (jac if jac is not None else np.zeros((self.n_points, self.n_coef)), val0)

    @property
    def is_linear(self) -> bool:
        return self._linear is not None

    def _leaf_value(self, node):
        key = id(node)
        if key not in self._leaf:
            if isinstance(node, Coordinate):
                v = self.X[:, node.dim].copy()
            elif isinstance(node, Constant):
                v = np.full(self.n_points, float(node.value))
            else:
                v = np.array(node(self.X), dtype=np.float64)
            self._leaf[key] = (node, v)
        return self._leaf[key][1]

    # -- forward mode: (value, jacobian or None) -----------------------------
    def _forward(self, node, y):
        if isinstance(node, SurrogateTerm):
            B = self._mats[tuple(int(o) for o in node.orders)]
            return B @ y, B
        if isinstance(node, (Coordinate, Constant, SourceTerm)):
            return self._leaf_value(node), None
        if isinstance(node, Negate):
            v, J = self._forward(node.child, y)
            return -v, (None if J is None else -J)
        if isinstance(node, Sum):
            v = np.zeros(self.n_points)
            J = None
            for c in node.children:
                cv, cJ = self._forward(c, y)
                v = v + cv
                if cJ is not None:
                    J = cJ.copy() if J is None else J + cJ
            return v, J
        if isinstance(node, Product):
            parts = [self._forward(c, y) for c in node.children]
            vals = [p[0] for p in parts]
            v = np.ones(self.n_points)
            for cv in vals:
                v = v * cv
            J = None
            for i, (_, cJ) in enumerate(parts):
                if cJ is None:
                    continue
                others = np.ones(self.n_points)
                for k, cv in enumerate(vals):
                    if k != i:
                        others = others * cv
                term = others[:, None] * cJ
                J = term if J is None else J + term
            return v, J
        if isinstance(node, Power):
            cv, cJ = self._forward(node.child, y)
            k = int(node.exponent)
            v = cv ** k
            J = None if cJ is None else (k * cv ** (k - 1))[:, None] * cJ
            return v, J
        raise MalformedExpression(f"unknown node {node!r}")

    # -- values only, caching intermediate results for the backward pass -----
    def _values(self, node, y, cache):
        if isinstance(node, SurrogateTerm):
            v = self._mats[tuple(int(o) for o in node.orders)] @ y
        elif isinstance(node, (Coordinate, Constant, SourceTerm)):
            v = self._leaf_value(node)
        elif isinstance(node, Negate):
            v = -self._values(node.child, y, cache)
        elif isinstance(node, Sum):
            v = np.zeros(self.n_points)
            for c in node.children:
                v = v + self._values(c, y, cache)
        elif isinstance(node, Product):
            v = np.ones(self.n_points)
            for c in node.children:
                v = v * self._values(c, y, cache)
        elif isinstance(node, Power):
            v = self._values(node.child, y, cache) ** int(node.exponent)
        else:
            raise MalformedExpression(f"unknown node {node!r}")
        cache[id(node)] = v
        return v

    def _backward(self, node, bar, cache, grad):
        if isinstance(node, SurrogateTerm):
            grad += self._mats[tuple(int(o) for o in node.orders)].T @ bar
        elif isinstance(node, Negate):
            self._backward(node.child, -bar, cache, grad)
        elif isinstance(node, Sum):
            for c in node.children:
                if degree(c) > 0:
                    self._backward(c, bar, cache, grad)
        elif isinstance(node, Product):
            vals = [cache[id(c)] for c in node.children]
            for i, c in enumerate(node.children):
                if degree(c) == 0:
                    continue
                others = np.ones(self.n_points)
                for k, cv in enumerate(vals):
                    if k != i:
                        others = others * cv
                self._backward(c, bar * others, cache, grad)
        elif isinstance(node, Power):
            k = int(node.exponent)
            cv = cache[id(node.child)]
            self._backward(node.child, bar * k * cv ** (k - 1), cache, grad)

    def values(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self._linear is not None:
            J, v0 = self._linear
            return J @ y + v0
        return self._values(self.expr, y, {})

    def jacobian(self, y) -> np.ndarray:
        if self._linear is not None:
            return self._linear[0]
        _, J = self._forward(self.expr, np.asarray(y, dtype=np.float64))
        return np.zeros((self.n_points, self.n_coef)) if J is None else J

    def value_and_vjp(self, y, weights_fn):
        """Residual values and ``J^T w`` where ``w = weights_fn(values)``."""
        y = np.asarray(y, dtype=np.float64)
        if self._linear is not None:
            J, v0 = self._linear
            r = J @ y + v0
            return r, J.T @ weights_fn(r)
        cache = {}
        r = self._values(self.expr, y, cache)
        grad = np.zeros(self.n_coef)
        self._backward(self.expr, weights_fn(r), cache, grad)
        return r, grad


def residual_eval(expr: Node, model, point):
    """Residual value and its exact gradient over coefficients at one point."""
    point = np.asarray(point, dtype=np.float64).reshape(1, -1)
    if point.shape[1] != model.dims:
        raise ValueError(f"point has {point.shape[1]} coordinates, model has {model.dims}")
    comp = CompiledResidual(expr, model.indices, model.scaling, point)
    v, J = comp._forward(expr, model.coefficients)
    grad = np.zeros(len(model.indices)) if J is None else np.array(J[0])
    return float(v[0]), grad


def hinge(v):
    """Violation part of an inequality ``H >= 0``: zero when satisfied, else ``v``."""
    return np.minimum(v, 0.0) if np.ndim(v) else min(float(v), 0.0)
