"""Orthonormal polynomial bases: univariate families, total-degree index sets
and tensor-product evaluation with physical-coordinate derivatives.

Every dimension carries an affine map from its physical bounds ``[lo, hi]``
onto the standardized coordinate ``[-1, 1]``.  For Legendre dimensions the
bounds are the support of the uniform input.  For Hermite dimensions the
same map is read as ``x = mean + std * xi``: the midpoint of the bounds is
the mean and the half-width is the standard deviation, so ``(-1, 1)``
describes a standard normal variable.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels

#: Refuse to build index sets larger than this unless told otherwise.
MAX_CARDINALITY = 2_000_000


class BasisTooLarge(ValueError):
    """Requested truncation set exceeds the configured cardinality limit."""


class PolynomialFamily(enum.Enum):
    LEGENDRE = "legendre"
    HERMITE = "hermite"

    @classmethod
    def parse(cls, value) -> "PolynomialFamily":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown polynomial family {value!r}") from None


@functools.lru_cache(maxsize=None)
def _jacobi_offdiag(family: PolynomialFamily, max_degree: int) -> np.ndarray:
    # b[k] couples p_k and p_{k-1}; b[0] is unused.
    k = np.arange(1, max_degree + 2, dtype=np.float64)
    if family is PolynomialFamily.LEGENDRE:
        b = k / np.sqrt(4.0 * k * k - 1.0)
    else:
        b = np.sqrt(k)
    b = np.concatenate([[1.0], b])
    b.setflags(write=False)
    return b


def univariate_table(family, x_std, max_degree: int, max_order: int = 0) -> np.ndarray:
    """Values and derivatives of all degrees ``0..max_degree`` at ``x_std``.

    Returns an array of shape ``(max_order + 1, len(x_std), max_degree + 1)``;
    entry ``[m, i, k]`` is the m-th derivative of the degree-k orthonormal
    polynomial in the standardized coordinate.
    """
    family = PolynomialFamily.parse(family)
    x = np.ascontiguousarray(np.atleast_1d(np.asarray(x_std, dtype=np.float64)))
    b = _jacobi_offdiag(family, max(int(max_degree), 1))
    return kernels.recurrence_table(x, b, int(max_degree), int(max_order))


def univariate_eval(family, degree: int, x_std) -> float | np.ndarray:
    out = univariate_table(family, x_std, degree, 0)[0, :, degree]
    return float(out[0]) if np.ndim(x_std) == 0 else out


def univariate_derivative(family, degree: int, order: int, x_std) -> float | np.ndarray:
    """``order``-th derivative in the standardized coordinate (no domain scaling)."""
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    out = univariate_table(family, x_std, degree, order)[order, :, degree]
    return float(out[0]) if np.ndim(x_std) == 0 else out


@functools.lru_cache(maxsize=None)
def _compositions(total: int, parts: int) -> np.ndarray:
    """All ``parts``-tuples summing to ``total``, descending lexicographic."""
    if parts == 1:
        out = np.array([[total]], dtype=np.int64)
    else:
        blocks = []
        for first in range(total, -1, -1):
            rest = _compositions(total - first, parts - 1)
            head = np.full((rest.shape[0], 1), first, dtype=np.int64)
            blocks.append(np.hstack([head, rest]))
        out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def total_degree_cardinality(dims: int, p: int) -> int:
    return math.comb(dims + p, p)


class MultiIndexSet:
    """Ordered, duplicate-free set of degree tuples.

    The canonical order is graded lexicographic: total degree first, then
    descending lexicographic within a degree.
    """

    __slots__ = ("_array", "_lookup")

    def __init__(self, indices, dims: int | None = None):
        arr = np.array(indices, dtype=np.int64, copy=True)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, dims or 0)
        if arr.ndim != 2:
            raise ValueError("multi-indices must form a 2-D array")
        if dims is not None and arr.shape[1] != dims:
            raise ValueError(f"expected {dims}-dimensional multi-indices, got {arr.shape[1]}")
        if (arr < 0).any():
            raise ValueError("multi-index entries must be non-negative")
        arr.setflags(write=False)
        self._array = arr
        self._lookup = None
        if len(self.lookup) != arr.shape[0]:
            raise ValueError("duplicate multi-indices")

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def dims(self) -> int:
        return self._array.shape[1]

    @property
    def max_degree(self) -> int:
        return int(self._array.sum(axis=1).max()) if len(self) else 0

    @property
    def lookup(self) -> dict:
        if self._lookup is None:
            self._lookup = {tuple(int(v) for v in row): i for i, row in enumerate(self._array)}
        return self._lookup

    def __len__(self):
        return self._array.shape[0]

    def __iter__(self):
        return (tuple(int(v) for v in row) for row in self._array)

    def __getitem__(self, i):
        return tuple(int(v) for v in self._array[i])

    def __contains__(self, alpha):
        return tuple(alpha) in self.lookup

    def __eq__(self, other):
        return isinstance(other, MultiIndexSet) and np.array_equal(self._array, other._array)

    def __hash__(self):
        return hash(self._array.tobytes())

    def __repr__(self):
        return f"MultiIndexSet(dims={self.dims}, size={len(self)})"

    def position(self, alpha) -> int:
        try:
            return self.lookup[tuple(int(a) for a in alpha)]
        except KeyError:
            raise KeyError(f"multi-index {tuple(alpha)} not in set") from None

    def subset(self, positions) -> "MultiIndexSet":
        """Sub-basis made of the given positions, in the given order."""
        return MultiIndexSet(self._array[np.asarray(positions, dtype=np.int64)])


def total_degree_index_set(dims: int, p: int, max_cardinality: int = MAX_CARDINALITY) -> MultiIndexSet:
    """All multi-indices with total degree at most ``p``."""
    if dims < 1 or p < 0:
        raise ValueError("need dims >= 1 and p >= 0")
    size = total_degree_cardinality(dims, p)
    if size > max_cardinality:
        raise BasisTooLarge(f"total-degree set with dims={dims}, p={p} has {size} terms "
                            f"(limit {max_cardinality})")
    arr = np.vstack([_compositions(k, dims) for k in range(p + 1)])
    return MultiIndexSet(arr)


@dataclass(frozen=True)
class DomainScaling:
    """Per-dimension bounds and polynomial family."""

    bounds: tuple
    families: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        families = tuple(PolynomialFamily.parse(f) for f in self.families)
        if len(bounds) != len(families):
            raise ValueError("bounds and families differ in length")
        for d, (lo, hi) in enumerate(bounds):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"invalid bounds for dimension {d}: ({lo}, {hi})")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "families", families)

    @classmethod
    def uniform(cls, bounds) -> "DomainScaling":
        return cls(tuple(bounds), (PolynomialFamily.LEGENDRE,) * len(bounds))

    @property
    def dims(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def factors(self) -> np.ndarray:
        """d(standardized)/d(physical) per dimension, ``2 / (hi - lo)``."""
        return 2.0 / (self.upper - self.lower)

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        self._check(X)
        lo, hi = self.lower, self.upper
        return (2.0 * (X - lo) - (hi - lo)) / (hi - lo)

    def unstandardize(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        self._check(Z)
        lo, hi = self.lower, self.upper
        return lo + 0.5 * (Z + 1.0) * (hi - lo)

    def _check(self, X):
        if X.shape[-1] != self.dims:
            raise ValueError(f"points have {X.shape[-1]} coordinates, scaling has {self.dims}")

    def to_dict(self) -> dict:
        return {"bounds": [list(b) for b in self.bounds],
                "families": [f.value for f in self.families]}


class BasisTables:
    """Univariate tables for one point set, reused across derivative orders.

    Building the tables is the expensive part; assembling a design matrix
    for any orders tuple up to ``max_order`` afterwards is one fused kernel
    call.
    """

    def __init__(self, indices: MultiIndexSet, scaling: DomainScaling, X, max_order: int = 0):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if indices.dims != scaling.dims:
            raise ValueError("index set and scaling dimensions differ")
        Z = scaling.standardize(X)
        p = max(indices.max_degree, 1)
        tabs = np.empty((scaling.dims, max_order + 1, Z.shape[0], p + 1))
        for d, fam in enumerate(scaling.families):
            tabs[d] = univariate_table(fam, Z[:, d], p, max_order)
        self.tables = tabs
        self.indices = indices
        self.scaling = scaling
        self.max_order = max_order
        self.n_points = Z.shape[0]

    def matrix(self, orders=None) -> np.ndarray:
        dims = self.scaling.dims
        if orders is None:
            orders = (0,) * dims
        orders = np.ascontiguousarray(orders, dtype=np.int64)
        if orders.shape != (dims,):
            raise ValueError(f"orders must have length {dims}")
        if orders.max(initial=0) > self.max_order:
            raise ValueError("derivative order exceeds the tabulated order")
        scale = float(np.prod(self.scaling.factors ** orders))
        return kernels.tensor_design(self.tables, self.indices.array, orders, scale)


def design_matrix(indices: MultiIndexSet, scaling: DomainScaling, X, orders=None) -> np.ndarray:
    """Rows are points, columns basis functions, optionally differentiated."""
    max_order = 0 if orders is None else int(max(orders))
    return BasisTables(indices, scaling, X, max_order).matrix(orders)


def _check_alpha(alpha, scaling, X):
    alpha = tuple(int(a) for a in alpha)
    X = np.asarray(X, dtype=np.float64)
    if len(alpha) != scaling.dims or X.shape[-1] != scaling.dims:
        raise ValueError("dimension mismatch between multi-index, scaling and point")
    return alpha, X


def multivariate_eval(indices: MultiIndexSet, alpha, scaling: DomainScaling, X) -> float:
    """Tensor-product basis function ``alpha`` at one physical point."""
    return multivariate_partial(indices, alpha, scaling, X, (0,) * len(tuple(alpha)))


def multivariate_partial(indices: MultiIndexSet, alpha, scaling: DomainScaling, X, orders) -> float:
    """Physical-coordinate partial derivative of basis function ``alpha``."""
    alpha, X = _check_alpha(alpha, scaling, X)
    if alpha not in indices:
        raise KeyError(f"multi-index {alpha} not in set")
    if len(orders) != scaling.dims:
        raise ValueError("orders length differs from dimension count")
    single = MultiIndexSet([alpha])
    return float(design_matrix(single, scaling, X.reshape(1, -1), orders)[0, 0])
