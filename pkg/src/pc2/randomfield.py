"""Karhunen–Loève expansion of a 1-D Gaussian field with exponential covariance.

``C(x1, x2) = sigma**2 * exp(-|x1 - x2| / l_c)`` on ``[0, L]`` is discretized
by the Nyström method with trapezoid weights ``w`` on a uniform grid; the
symmetric problem ``W^1/2 C W^1/2 v = lam v`` gives eigenfunctions
``phi = W^-1/2 v``, orthonormal under the weighted inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class ResolutionTooCoarse(ValueError):
    pass


def exponential_kernel(x1, x2, sigma: float, corr_length: float) -> np.ndarray:
    return sigma ** 2 * np.exp(-np.abs(np.subtract.outer(x1, x2)) / corr_length)


def trapezoid_weights(n: int, length: float) -> np.ndarray:
    w = np.full(n, length / (n - 1))
    w[[0, -1]] *= 0.5
    return w


@dataclass(frozen=True)
class KLExpansion:
    mean: float
    sigma: float
    corr_length: float
    length: float
    grid: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # (n_grid, r)

    @property
    def r(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def trace(self) -> float:
        """Integral of the variance over the domain, ``sigma**2 * L``."""
        return self.sigma ** 2 * self.length

    @property
    def captured_fraction(self) -> float:
        return float(self.eigenvalues.sum() / self.trace)

    def gram(self) -> np.ndarray:
        """Weighted inner products of the eigenfunctions (identity up to round-off)."""
        phi = self.eigenfunctions
        return phi.T @ (self.weights[:, None] * phi)

    def covariance(self) -> np.ndarray:
        """Truncated covariance ``sum_i lam_i phi_i phi_i^T`` on the grid."""
        phi = self.eigenfunctions
        return (phi * self.eigenvalues) @ phi.T


def kl_expand(sigma: float, corr_length: float, length: float, r: int, n_grid: int = 256,
              mean: float = 0.0) -> KLExpansion:
    if r < 1:
        raise ValueError("r must be >= 1")
    if not (sigma > 0 and corr_length > 0 and length > 0):
        raise ValueError("sigma, corr_length and length must be positive")
    if n_grid < 4 * r:
        raise ResolutionTooCoarse(f"{n_grid} grid nodes cannot resolve {r} modes (need >= {4 * r})")
    x = np.linspace(0.0, length, n_grid)
    w = trapezoid_weights(n_grid, length)
    sw = np.sqrt(w)
    B = sw[:, None] * exponential_kernel(x, x, sigma, corr_length) * sw[None, :]
    vals, vecs = scipy.linalg.eigh(B, subset_by_index=(n_grid - r, n_grid - 1))
    vals, vecs = vals[::-1], vecs[:, ::-1]
    if not np.all(vals > 0):
        raise ResolutionTooCoarse("non-positive eigenvalue among the requested modes")
    phi = vecs / sw[:, None]
    for i in range(r):
        first = np.flatnonzero(np.abs(phi[:, i]) > 1e-12 * np.abs(phi[:, i]).max())[0]
        if phi[first, i] < 0:
            phi[:, i] = -phi[:, i]
    for a in (x, w, vals, phi):
        a.setflags(write=False)
    return KLExpansion(float(mean), float(sigma), float(corr_length), float(length), x, w, vals, phi)


def sample_field(kl: KLExpansion, xi, x=None) -> np.ndarray:
    """``mean + sum_i sqrt(lam_i) phi_i xi_i`` on the grid, or interpolated at ``x``.

    ``xi`` may be a single r-vector or an array of shape (n_samples, r).
    """
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape[-1] != kl.r:
        raise ValueError(f"expected {kl.r} standard normals, got {xi.shape[-1]}")
    modes = kl.eigenfunctions * np.sqrt(kl.eigenvalues)
    field = kl.mean + xi @ modes.T
    if x is None:
        return field
    x = np.asarray(x, dtype=np.float64)
    if field.ndim == 1:
        return np.interp(x, kl.grid, field)
    return np.stack([np.interp(x, kl.grid, f) for f in field])
