"""1-D viscous Burgers equation ``u_t + u u_x = nu u_xx`` on [0, 1].

Crank–Nicolson in time on the conservative form with central differences,
solved by Newton's method with a tridiagonal Jacobian each step.  Walls are
homogeneous Dirichlet.  The Cole–Hopf series for ``u(x, 0) = sin(pi x)``
provides an exact oracle.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.special import ive

from .grid import GridSolution


class NewtonNonconvergence(RuntimeError):
    pass


def _residual_terms(u, h, nu):
    """Interior values of ``(u^2/2)_x - nu u_xx``."""
    conv = (u[2:] ** 2 - u[:-2] ** 2) / (4.0 * h)
    diff = nu * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    return conv - diff


def burgers_solve(nu: float, nx: int = 401, nt: int = 600, t_final: float = 0.3,
                  ic=lambda x: np.sin(np.pi * x), store_every: int = 1,
                  tol: float = 1e-12, max_newton: int = 25) -> GridSolution:
    if not nu > 0 or nx < 3 or nt < 1:
        raise ValueError("need nu > 0, nx >= 3, nt >= 1")
    x = np.linspace(0.0, 1.0, nx)
    h = x[1] - x[0]
    dt = t_final / nt
    u = np.asarray(ic(x), dtype=np.float64).copy()
    u[0] = u[-1] = 0.0
    frames, times = [u.copy()], [0.0]
    c = 0.5 * dt
    n_in = nx - 2
    ab = np.zeros((3, n_in))
    for k in range(1, nt + 1):
        Nu = _residual_terms(u, h, nu)
        v = u.copy()
        for it in range(max_newton):
            F = v[1:-1] - u[1:-1] + c * (_residual_terms(v, h, nu) + Nu)
            ab[0, 1:] = c * (v[2:-1] / (2 * h) - nu / h ** 2)      # super-diagonal
            ab[1, :] = 1.0 + c * 2.0 * nu / h ** 2                 # diagonal
            ab[2, :-1] = c * (-v[1:-2] / (2 * h) - nu / h ** 2)    # sub-diagonal
            delta = scipy.linalg.solve_banded((1, 1), ab, -F)
            v[1:-1] += delta
            if np.max(np.abs(delta)) <= tol * max(1.0, np.max(np.abs(v))):
                break
        else:
            raise NewtonNonconvergence(f"Newton did not converge at step {k} (nu={nu})")
        if not np.all(np.isfinite(v)):
            raise NewtonNonconvergence(f"non-finite iterate at step {k}")
        u = v
        if k % store_every == 0 or k == nt:
            frames.append(u.copy())
            times.append(k * dt)
    peclet = float(np.max(np.abs(frames[0])) * h / nu)
    return GridSolution({"x": x, "t": np.array(times)}, np.stack(frames, axis=-1),
                        {"scheme": "crank-nicolson/central/newton", "nx": nx, "nt": nt, "dt": dt,
                         "nu": nu, "cell_peclet": peclet})


def cole_hopf_sine(nu: float, x, t, n_terms: int = 50):
    """Exact solution for ``u(x, 0) = sin(pi x)`` with zero walls.

    With ``k = 1 / (2 pi nu)`` the heat-equation potential is
    ``I_0(k) + 2 sum_n I_n(k) exp(-n^2 pi^2 nu t) cos(n pi x)`` and
    ``u = -2 nu phi_x / phi``; exponentially scaled Bessel functions keep
    the ratio finite for small ``nu``.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    x, t = np.broadcast_arrays(x, t)
    k = 1.0 / (2.0 * np.pi * nu)
    n = np.arange(1, n_terms + 1)
    a = ive(n, k)
    decay = np.exp(-np.multiply.outer(t, n ** 2) * np.pi ** 2 * nu)
    num = (a * n * decay * np.sin(np.pi * np.multiply.outer(x, n))).sum(-1)
    den = ive(0, k) + 2.0 * (a * decay * np.cos(np.pi * np.multiply.outer(x, n))).sum(-1)
    return 4.0 * np.pi * nu * num / den
