"""Least angle regression over a polynomial design and the sparse PC² loop.

LAR is used only to order the candidate basis functions; coefficients are
always refitted by the PC² trainer on the selected subset.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import DomainScaling, MultiIndexSet, design_matrix, total_degree_index_set
from .surrogate import DesignSystem
from .trainer import TrainConfig, TrainingData, train

log = logging.getLogger(__name__)

_TIE_TOL = 1e-12


class DegenerateColumns(UserWarning):
    """Two candidate columns coincide (up to sign) after standardization."""


class DegenerateColumnsError(ValueError):
    pass


@dataclass
class LarPath:
    """Entry order and per-step coefficients of a LAR path.

    ``order`` lists design-column positions in the order they entered;
    ``intercepts`` are the constant columns, which carry the mean and are not
    part of the correlation race.  ``coefficients[s]`` is the full-length
    coefficient vector (original column scale) after step ``s``.
    """

    order: list
    coefficients: list
    correlations: list
    intercepts: list = field(default_factory=list)
    dropped: list = field(default_factory=list)

    def __len__(self):
        return len(self.order)

    def basis_order(self) -> list:
        """Intercept columns first, then LAR entries."""
        return list(self.intercepts) + list(self.order)

    @property
    def final(self) -> np.ndarray:
        return self.coefficients[-1]


def _standardize(A):
    mean = A.mean(axis=0)
    Ac = A - mean
    norms = np.linalg.norm(Ac, axis=0)
    scale = np.maximum(np.abs(A).max(axis=0), 1.0)
    const = norms <= 1e-13 * scale * math.sqrt(A.shape[0])
    Xs = np.zeros_like(Ac)
    Xs[:, ~const] = Ac[:, ~const] / norms[~const]
    return Xs, mean, norms, const


def _find_ties(Xs, candidates):
    """Later members of identical (up to sign) standardized column pairs."""
    dropped = []
    cand = list(candidates)
    if len(cand) < 2:
        return dropped
    G = Xs[:, cand].T @ Xs[:, cand]
    for a in range(len(cand)):
        if cand[a] in dropped:
            continue
        for b in range(a + 1, len(cand)):
            if cand[b] not in dropped and abs(abs(G[a, b]) - 1.0) < _TIE_TOL:
                dropped.append(cand[b])
    return dropped


def lar_path(system: DesignSystem, max_steps: int | None = None, strict: bool = False) -> LarPath:
    """Classic (no-drop) least angle regression on standardized columns.

    The path ends at the least-squares solution on every entered column;
    with at least as many rows as columns that is the full OLS fit.
    """
    A, y = system.matrix, system.responses
    n, P = A.shape
    if n < 2:
        raise ValueError("LAR needs at least two rows")
    Xs, mean, norms, const = _standardize(A)
    intercepts = [int(j) for j in np.flatnonzero(const)]
    candidates = [j for j in range(P) if not const[j]]
    dropped = _find_ties(Xs, candidates)
    if dropped:
        msg = f"columns {dropped} duplicate earlier columns after standardization; keeping the lowest index"
        if strict:
            raise DegenerateColumnsError(msg)
        warnings.warn(msg, DegenerateColumns, stacklevel=2)
    candidates = [j for j in candidates if j not in dropped]
    n_steps = min(len(candidates), n - 1)
    if max_steps is not None:
        n_steps = min(n_steps, int(max_steps))

    y_mean = float(y.mean())
    yc = y - y_mean
    beta = np.zeros(P)  # standardized scale
    mu = np.zeros(n)
    active: list = []
    inactive = list(candidates)
    order, coefs, corrs = [], [], []

    def to_original(b):
        out = np.zeros(P)
        nz = ~const
        out[nz] = b[nz] / norms[nz]
        if intercepts:
            j0 = intercepts[0]
            out[j0] = (y_mean - float(out[nz] @ mean[nz])) / A[0, j0]
        return out

    for step in range(n_steps):
        c = Xs.T @ (yc - mu)
        ci = np.abs(c[inactive])
        j = inactive[int(np.argmax(ci))]  # argmax returns the lowest index on ties
        C = float(np.abs(c[j]))
        active.append(j)
        inactive.remove(j)
        order.append(j)
        corrs.append(C)
        last = step == n_steps - 1
        if last and (len(active) == len(candidates) or len(active) == n - 1):
            # endpoint: the complete least-squares fit on the active columns
            sol, *_ = np.linalg.lstsq(Xs[:, active], yc, rcond=None)
            beta = np.zeros(P)
            beta[active] = sol
            coefs.append(to_original(beta))
            break
        s = np.sign(c[active])
        XA = Xs[:, active] * s
        G = XA.T @ XA
        ones = np.ones(len(active))
        try:
            Gi1 = np.linalg.solve(G, ones)
        except np.linalg.LinAlgError:
            Gi1 = np.linalg.lstsq(G, ones, rcond=None)[0]
        AA = 1.0 / math.sqrt(max(float(ones @ Gi1), 1e-300))
        w = AA * Gi1
        u = XA @ w
        gamma = C / AA
        if inactive:
            a = Xs[:, inactive].T @ u
            cj = c[inactive]
            with np.errstate(divide="ignore", invalid="ignore"):
                g1 = (C - cj) / (AA - a)
                g2 = (C + cj) / (AA + a)
            g = np.concatenate([g1, g2])
            g = g[np.isfinite(g) & (g > 1e-15)]
            if g.size:
                gamma = min(gamma, float(g.min()))
        mu = mu + gamma * u
        beta[active] += gamma * s * w
        coefs.append(to_original(beta))
    return LarPath(order, coefs, corrs, intercepts, dropped)


@dataclass
class SparseConfig:
    tau: float
    p_min: int | None = None
    step: int | None = None
    cap: int | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    def resolved(self, dims: int, P: int) -> tuple:
        p_min = self.p_min if self.p_min is not None else max(10, dims + 1)
        step = self.step if self.step is not None else max(5, int(round(P / 50)))
        cap = self.cap if self.cap is not None else P
        p_min = min(p_min, P)
        cap = min(cap, P)
        if not (1 <= p_min <= cap) or step < 1:
            raise ValueError("need 1 <= p_min <= cap <= P and step >= 1")
        return p_min, step, cap


@dataclass
class SparseReport:
    rows: list
    selected: int
    above_threshold: bool
    order: list
    train_report: object = None

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "L_T", "L_PDE", "L_IC", "L_BC", "total"])
            for r in self.rows:
                w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
        return path


def sparse_pc2_train(config: TrainConfig, data: TrainingData, constraints, scaling: DomainScaling,
                     sparse: SparseConfig, variables=(), n_physical: int | None = None,
                     indices: MultiIndexSet | None = None):
    """Grow the basis along the LAR order until the PC² loss drops below tau.

    Returns ``(model, SparseReport)``; the report's ``above_threshold`` flag
    is set when the cap was reached without meeting tau.
    """
    if data is None or not data.n_rows:
        raise ValueError("sparse PC² needs training data for basis selection")
    if indices is None:
        indices = total_degree_index_set(scaling.dims, config.degree, config.max_cardinality)
    A = design_matrix(indices, scaling, data.X)
    path = lar_path(DesignSystem(A, data.Y))
    ranked = path.basis_order()
    p_min, step, cap = sparse.resolved(scaling.dims, len(indices))
    cap = min(cap, len(ranked))
    p_min = min(p_min, cap)
    rows = []
    k = p_min
    prev = None
    while True:
        chosen = sorted(ranked[:k])
        sub = indices.subset(chosen)
        y0 = None
        if prev is not None:
            lookup = prev.indices.lookup
            y0 = np.array([prev.coefficients[lookup[a]] if a in lookup else 0.0 for a in sub])
        model, report = train(config, data, constraints, scaling, variables, n_physical, sub, y0)
        L = report.losses
        rows.append((k, L.L_T, L.L_PDE, L.L_IC, L.L_BC, L.total))
        log.info("sparse PC2: k=%d total=%.4g", k, L.total)
        prev = model
        if L.total < sparse.tau:
            return model.with_coefficients(model.coefficients, sparse_k=k), \
                SparseReport(rows, k, False, ranked, report)
        if k >= cap:
            return model.with_coefficients(model.coefficients, sparse_k=k, above_threshold=True), \
                SparseReport(rows, k, True, ranked, report)
        k = min(k + step, cap)
