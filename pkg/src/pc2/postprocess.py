"""Reduced expansions conditioned on physical coordinates, and statistics.

A model over ``(X, xi)`` is rewritten, at a fixed physical point ``X``, as a
polynomial in ``xi`` alone whose coefficients are

    y_{a_xi}(X) = sum_{a_X in T(a_xi)} y_{(a_X, a_xi)} Psi_{a_X}(X)

where ``T(a_xi)`` collects the physical parts paired with ``a_xi``.  Because
the stochastic basis is orthonormal under the input distribution, the mean
is the coefficient of the zero stochastic index and the variance is the sum
of squares of the others; Sobol indices follow from the same sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import gaussian_kde

from .basis import DomainScaling, MultiIndexSet, design_matrix
from .sampling import draw_inputs, rng_for
from .surrogate import SurrogateModel


class ZeroVariance(ValueError):
    """Sensitivity indices requested where the conditional variance is 0."""


def _grlex_key(t):
    return (sum(t), tuple(-v for v in t))


@dataclass(frozen=True)
class IndexPartition:
    """``stochastic[i]`` pairs with physical parts ``physical[i]``.

    ``positions[i]`` holds the positions in the full index set of the
    tuples ``physical[i][k] + stochastic[i]``.
    """

    n_physical: int
    stochastic: tuple
    physical: tuple
    positions: tuple

    def reconstruct(self) -> set:
        return {p + s for s, ps in zip(self.stochastic, self.physical) for p in ps}


def partition_indices(indices: MultiIndexSet, n_physical: int) -> IndexPartition:
    if not 0 <= n_physical < indices.dims:
        raise ValueError("need 0 <= n_physical < dims")
    groups: dict = {}
    for pos, alpha in enumerate(indices):
        groups.setdefault(alpha[n_physical:], []).append((alpha[:n_physical], pos))
    keys = sorted(groups, key=_grlex_key)
    return IndexPartition(
        n_physical,
        tuple(keys),
        tuple(tuple(p for p, _ in groups[k]) for k in keys),
        tuple(tuple(pos for _, pos in groups[k]) for k in keys),
    )


def _split_scaling(scaling: DomainScaling, n_physical: int):
    phys = DomainScaling(scaling.bounds[:n_physical], scaling.families[:n_physical]) if n_physical else None
    stoch = DomainScaling(scaling.bounds[n_physical:], scaling.families[n_physical:])
    return phys, stoch


@dataclass(frozen=True)
class ReducedExpansion:
    """Polynomial in the stochastic inputs at a fixed physical point."""

    X_phys: tuple
    indices: MultiIndexSet
    coefficients: np.ndarray
    scaling: DomainScaling

    def __call__(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        return design_matrix(self.indices, self.scaling, xi) @ self.coefficients

    @property
    def mean(self) -> float:
        return float(self.coefficients[0]) if not any(self.indices[0]) else 0.0

    @property
    def variance(self) -> float:
        c = self.coefficients
        return float(c[1:] @ c[1:]) if not any(self.indices[0]) else float(c @ c)


class Reducer:
    """Precomputed partition for repeated conditioning of one model."""

    def __init__(self, model: SurrogateModel):
        n = model.n_physical
        if n >= model.dims:
            raise ValueError("model has no stochastic dimensions")
        self.model = model
        self.partition = partition_indices(model.indices, n)
        self.phys_scaling, self.stoch_scaling = _split_scaling(model.scaling, n)
        self.stoch_indices = MultiIndexSet(self.partition.stochastic, model.dims - n)
        arr = model.indices.array
        self.phys_indices = None
        if n:
            phys_unique = sorted({tuple(int(v) for v in r) for r in arr[:, :n]}, key=_grlex_key)
            self.phys_indices = MultiIndexSet(phys_unique, n)
            look = self.phys_indices.lookup
            col = np.array([look[tuple(int(v) for v in r)] for r in arr[:, :n]])
        else:
            col = np.zeros(len(arr), dtype=np.int64)
        # M[phys column, stochastic slot] accumulates y_a
        slot = np.empty(len(arr), dtype=np.int64)
        for i, positions in enumerate(self.partition.positions):
            slot[list(positions)] = i
        n_phys_cols = len(self.phys_indices) if n else 1
        M = np.zeros((n_phys_cols, len(self.stoch_indices)))
        np.add.at(M, (col, slot), model.coefficients)
        self.M = M

    def coefficients(self, X_phys) -> np.ndarray:
        """Reduced coefficients, one row per physical point."""
        n = self.model.n_physical
        if not n:
            X = np.asarray(X_phys, dtype=np.float64)
            rows = X.shape[0] if X.ndim == 2 else 1
            return np.repeat(self.M, max(rows, 1), axis=0)
        X = np.atleast_2d(np.asarray(X_phys, dtype=np.float64))
        if X.shape[1] != n:
            raise ValueError(f"expected {n} physical coordinates, got {X.shape[1]}")
        return design_matrix(self.phys_indices, self.phys_scaling, X) @ self.M

    def reduce(self, X_phys) -> ReducedExpansion:
        c = self.coefficients(X_phys)[0]
        return ReducedExpansion(tuple(np.atleast_1d(np.asarray(X_phys, dtype=float)).tolist()),
                                self.stoch_indices, c, self.stoch_scaling)

    def moments(self, X_phys):
        """``(mean, variance)`` arrays over physical points."""
        C = self.coefficients(X_phys)
        zero = [i for i, a in enumerate(self.partition.stochastic) if not any(a)]
        mean = C[:, zero[0]] if zero else np.zeros(C.shape[0])
        rest = np.ones(C.shape[1], dtype=bool)
        rest[zero] = False
        var = np.einsum("ij,ij->i", C[:, rest], C[:, rest])
        return mean, var

    def sobol(self, X_phys):
        """``(first, total)`` per stochastic dimension at one physical point."""
        c = self.coefficients(X_phys)[0]
        A = np.array(self.partition.stochastic, dtype=np.int64).reshape(len(c), -1)
        nz = A > 0
        varying = nz.any(axis=1)
        c2 = c * c
        var = float(c2[varying].sum())
        if not var > 0:
            raise ZeroVariance(f"conditional variance is zero at {X_phys}")
        only = nz & (nz.sum(axis=1) == 1)[:, None]
        first = (c2[:, None] * only).sum(axis=0) / var
        total = (c2[:, None] * nz).sum(axis=0) / var
        return first, total


def reduce(model: SurrogateModel, X_phys) -> ReducedExpansion:
    return Reducer(model).reduce(X_phys)


def conditional_moments(model: SurrogateModel, X_phys):
    """Mean and variance of the surrogate over the stochastic inputs at ``X_phys``."""
    mean, var = Reducer(model).moments(X_phys)
    if np.ndim(X_phys) <= 1:
        return float(mean[0]), float(var[0])
    return mean, var


def sobol_first_order(model: SurrogateModel, X_phys) -> np.ndarray:
    return Reducer(model).sobol(X_phys)[0]


def sobol_total(model: SurrogateModel, X_phys) -> np.ndarray:
    return Reducer(model).sobol(X_phys)[1]


@dataclass
class PDFEstimate:
    grid: np.ndarray
    density: np.ndarray
    samples: np.ndarray
    bandwidth: float
    point_mass: bool = False


def sample_reduced(model: SurrogateModel, X_phys, n_samples: int, seed: int = 0) -> np.ndarray:
    """Surrogate values at ``X_phys`` over seeded draws of the stochastic inputs."""
    red = reduce(model, X_phys)
    xi = draw_inputs(red.scaling, int(n_samples), rng_for(seed, "pdf"))
    return red(xi)


def pdf_estimate(model: SurrogateModel, X_phys, n_samples: int = 100_000, seed: int = 0,
                 bandwidth=None, n_grid: int = 512) -> PDFEstimate:
    """Gaussian-kernel density of the conditioned surrogate (Silverman bandwidth by default)."""
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    s = sample_reduced(model, X_phys, n_samples, seed)
    lo, hi = float(s.min()), float(s.max())
    if hi - lo <= 1e-14 * max(1.0, abs(lo)):
        return PDFEstimate(np.array([lo]), np.array([np.inf]), s, 0.0, True)
    if bandwidth is None:
        kde = gaussian_kde(s, bw_method="silverman")
    else:  # absolute kernel width -> scipy's factor of the sample std
        kde = gaussian_kde(s, bw_method=float(bandwidth) / float(np.std(s, ddof=1)))
    bw = float(np.sqrt(kde.covariance[0, 0]))
    grid = np.linspace(lo - 3 * bw, hi + 3 * bw, n_grid)
    return PDFEstimate(grid, kde(grid), s, bw)
