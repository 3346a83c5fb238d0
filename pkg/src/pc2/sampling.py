"""Latin hypercube designs and reproducible random streams.

All randomness flows from a root seed through ``numpy.random.PCG64``
streams.  A purpose tag (``"domain"``, ``"IC"``, ``"BC"``, ``"ED"``, ...)
selects an independent substream, so adding boundary points never
perturbs the interior design.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .basis import DomainScaling, PolynomialFamily

GENERATOR = "numpy.PCG64 via SeedSequence(seed, spawn_key=(crc32(tag),))"


def rng_for(seed: int, tag: str = "", *extra: int) -> np.random.Generator:
    key = (zlib.crc32(tag.encode("utf-8")),) + tuple(int(e) for e in extra)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass(frozen=True)
class SampleSpec:
    n_points: int
    bounds: tuple
    seed: int = 0
    tag: str = ""

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"invalid bounds ({lo}, {hi})")


def lhs_unit(n: int, dims: int, rng: np.random.Generator) -> np.ndarray:
    """Stratified design on the unit cube: one point per stratum per axis."""
    u = rng.random((n, dims))
    perms = np.column_stack([rng.permutation(n) for _ in range(dims)]) if dims else np.empty((n, 0))
    return (perms + u) / n


def lhs_sample(spec: SampleSpec) -> np.ndarray:
    rng = rng_for(spec.seed, spec.tag)
    lo = np.array([b[0] for b in spec.bounds], dtype=np.float64)
    hi = np.array([b[1] for b in spec.bounds], dtype=np.float64)
    u = lhs_unit(spec.n_points, len(spec.bounds), rng)
    return lo + u * (hi - lo)


def standardize(X, scaling: DomainScaling) -> np.ndarray:
    return scaling.standardize(X)


def unstandardize(Z, scaling: DomainScaling) -> np.ndarray:
    return scaling.unstandardize(Z)


def unit_to_inputs(U, scaling: DomainScaling) -> np.ndarray:
    """Map unit-cube samples to physical inputs through each marginal.

    Legendre dimensions are uniform on their bounds; Hermite dimensions are
    normal with mean/std read from the bounds (see :mod:`pc2.basis`).
    """
    U = np.asarray(U, dtype=np.float64)
    Z = np.empty_like(U)
    for d, fam in enumerate(scaling.families):
        if fam is PolynomialFamily.HERMITE:
            Z[:, d] = ndtri(np.clip(U[:, d], 1e-12, 1.0 - 1e-12))
        else:
            Z[:, d] = 2.0 * U[:, d] - 1.0
    return scaling.unstandardize(Z)


def sample_inputs(scaling: DomainScaling, n: int, seed: int, tag: str, fixed: dict | None = None) -> np.ndarray:
    """LHS over the input domain, optionally pinning some coordinates.

    ``fixed`` maps a dimension index to a value; those coordinates are set
    and the design is drawn over the remaining ones (boundary manifolds).
    """
    fixed = fixed or {}
    rng = rng_for(seed, tag)
    free = [d for d in range(scaling.dims) if d not in fixed]
    U = np.full((n, scaling.dims), 0.5)
    U[:, free] = lhs_unit(n, len(free), rng)
    X = unit_to_inputs(U, scaling)
    for d, v in fixed.items():
        X[:, d] = v
    return X


def draw_inputs(scaling: DomainScaling, n: int, rng: np.random.Generator) -> np.ndarray:
    """Plain Monte Carlo draws from the input marginals."""
    Z = np.empty((n, scaling.dims))
    for d, fam in enumerate(scaling.families):
        if fam is PolynomialFamily.HERMITE:
            Z[:, d] = rng.standard_normal(n)
        else:
            Z[:, d] = rng.uniform(-1.0, 1.0, n)
    return scaling.unstandardize(Z)
