"""Simply supported Euler–Bernoulli beam under a distributed load.

For a statically determinate beam the bending moment follows from the load
alone, so the deflection comes from two quadratures of
``w'' = M(x) / (E(x) I)`` followed by the linear correction that enforces
``w(0) = w(L) = 0``.  With the load ``q`` signed along ``+w``, a uniform load
gives ``M(x) = q x (x - L) / 2`` (so that ``(E I w'')'' = q``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid


class NonPositiveStiffness(ValueError):
    pass


@dataclass
class BeamProblem:
    length: float
    load: float
    inertia: float
    stiffness: object  # callable E(x) or array on the solver grid

    def __post_init__(self):
        if not (self.length > 0 and self.inertia > 0):
            raise ValueError("length and moment of inertia must be positive")


def uniform_moment(q: float, L: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * q * x * (x - L)


def beam_solve(problem: BeamProblem, nx: int = 1001) -> tuple:
    """Deflection on a uniform grid; returns ``(x, w)``."""
    L = problem.length
    x = np.linspace(0.0, L, nx)
    E = problem.stiffness(x) if callable(problem.stiffness) else np.asarray(problem.stiffness, dtype=float)
    E = np.broadcast_to(np.asarray(E, dtype=np.float64), x.shape)
    if np.any(E <= 0) or not np.all(np.isfinite(E)):
        raise NonPositiveStiffness("stiffness must be positive and finite on the grid")
    curv = uniform_moment(problem.load, L, x) / (E * problem.inertia)
    slope = cumulative_trapezoid(curv, x, initial=0.0)
    w = cumulative_trapezoid(slope, x, initial=0.0)
    w = w - w[-1] * x / L
    return x, w


def uniform_midspan_deflection(q: float, L: float, E: float, I: float) -> float:
    return 5.0 * q * L ** 4 / (384.0 * E * I)
