"""BFGS with a strong-Wolfe line search.

The objective may change between iterations (adaptive loss weights): the
caller supplies ``prepare(x)``, run once at the start of every iteration,
which returns a ``fun(x) -> (f, g)`` that stays fixed for that iteration's
line search and curvature pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NonFinite(FloatingPointError):
    """Objective or gradient became NaN/Inf."""


@dataclass
class BFGSResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    status: str
    converged: bool
    n_evals: int
    history: list = field(default_factory=list)


def _cubic_min(a, fa, ga, b, fb, gb):
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    den = gb - ga + 2.0 * d2
    if den == 0:
        return None
    t = b - (b - a) * (gb + d2 - d1) / den
    return t if np.isfinite(t) else None


def wolfe_search(phi, f0, g0, alpha1=1.0, c1=1e-4, c2=0.9, max_iter=40):
    """Strong-Wolfe step along a descent direction.

    ``phi(a)`` returns ``(f, dphi, payload)``; returns ``(a, f, payload)`` or
    ``None`` when no acceptable step is found.
    """
    a_prev, f_prev, g_prev = 0.0, f0, g0
    a = alpha1
    best = None
    for i in range(max_iter):
        fa, ga, pay = phi(a)
        if not np.isfinite(fa):
            a = 0.5 * (a_prev + a)
            continue
        if fa > f0 + c1 * a * g0 or (i > 0 and fa >= f_prev):
            return _zoom(phi, f0, g0, a_prev, f_prev, g_prev, a, fa, ga, c1, c2, best)
        if abs(ga) <= -c2 * g0:
            return a, fa, pay
        if fa < f0:
            best = (a, fa, pay)
        if ga >= 0:
            return _zoom(phi, f0, g0, a, fa, ga, a_prev, f_prev, g_prev, c1, c2, best)
        a_prev, f_prev, g_prev = a, fa, ga
        a = 2.0 * a
    return best


def _zoom(phi, f0, g0, lo, flo, glo, hi, fhi, ghi, c1, c2, best, max_iter=40):
    for _ in range(max_iter):
        t = _cubic_min(lo, flo, glo, hi, fhi, ghi)
        width = hi - lo
        if t is None or not (min(lo, hi) + 0.1 * abs(width) <= t <= max(lo, hi) - 0.1 * abs(width)):
            t = lo + 0.5 * width
        ft, gt, pay = phi(t)
        if not np.isfinite(ft) or ft > f0 + c1 * t * g0 or ft >= flo:
            hi, fhi, ghi = t, ft if np.isfinite(ft) else np.inf, gt
        else:
            if abs(gt) <= -c2 * g0:
                return t, ft, pay
            if best is None or ft < best[1]:
                best = (t, ft, pay)
            if gt * (hi - lo) >= 0:
                hi, fhi, ghi = lo, flo, glo
            lo, flo, glo = t, ft, gt
        if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
            break
    return best


def minimize_bfgs(prepare, x0, h0_diag=None, gtol=1e-8, max_iter=1000, callback=None):
    """Minimize with BFGS; ``prepare`` as described in the module docstring.

    Curvature pairs difference the gradients seen at the start of successive
    iterations, so when the objective drifts (adaptive weights) the inverse
    Hessian tracks the map whose root is sought rather than a stale frozen
    objective.  With a fixed objective this is plain BFGS.
    """
    x = np.array(x0, dtype=np.float64)
    n = x.size
    dinv = np.ones(n) if h0_diag is None else np.asarray(h0_diag, dtype=np.float64)
    H = None
    n_evals = 0
    history = []
    status, converged = "iteration cap reached", False
    f = g = None
    s = g_prev = None
    k = 0
    for k in range(max_iter + 1):
        fun = prepare(x)
        f, g = fun(x)
        n_evals += 1
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            raise NonFinite(f"non-finite objective or gradient at iteration {k}")
        if s is not None:
            H = _update(H, dinv, s, g - g_prev)
        gnorm = float(np.max(np.abs(g))) if n else 0.0
        if callback is not None:
            callback(k, x, f, g)
        if gnorm < gtol:
            status, converged = "gradient tolerance reached", True
            break
        if k == max_iter:
            break
        p = -(H @ g if H is not None else dinv * g)
        slope = float(g @ p)
        if not slope < 0:
            H = None
            p = -dinv * g
            slope = float(g @ p)

        def phi(a, p=p, fun=fun):
            fa, ga = fun(x + a * p)
            return fa, float(ga @ p), ga

        step = wolfe_search(phi, f, slope)
        n_evals += 1
        if step is None:
            s = None
            if H is not None:
                H = None  # retry from the scaled diagonal
                continue
            status = "line search failed"
            break
        a, f_new, _ = step
        s = a * p
        g_prev = g
        history.append((k, f, f_new))
        x = x + s
    return BFGSResult(x, float(f), g, k, status, converged, n_evals, history)


def _update(H, dinv, s, yv):
    sy = float(s @ yv)
    if not sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(yv)):
        return H
    if H is None:
        H = np.diag(sy / float(yv @ (dinv * yv)) * dinv)
    rho = 1.0 / sy
    Hy = H @ yv
    return H + ((sy + yv @ Hy) * rho * rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
