"""PC² objective assembly and quasi-Newton training.

The objective is ``sum_k w_k L_k + penalty`` over the active components
``k`` in {T, PDE, IC, BC}: the data misfit and the mean-squared equality
residuals of each constraint kind.  With adaptive weighting every weight is
that component's share of the summed losses, recomputed at the start of
each optimizer iteration and held fixed (not differentiated) within it.
The inequality penalty is the mean over inequality collocation points of
``factor * min(H, 0)**2``.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import BasisTables, DomainScaling, MultiIndexSet, total_degree_index_set
from .constraints import CompiledResidual, ConstraintSet
from .optimize import NonFinite, minimize_bfgs
from .surrogate import DesignSystem, RankDeficient, SurrogateModel, UnderdeterminedSystem, ols_solve

log = logging.getLogger(__name__)

COMPONENTS = ("T", "PDE", "IC", "BC")


@dataclass
class TrainingData:
    """Model evaluations: rows of inputs and responses, grouped by evaluation.

    ``groups[r]`` is the evaluation that row ``r`` came from; the data loss
    averages within each evaluation first, then over evaluations.
    """

    X: np.ndarray
    Y: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.Y = np.asarray(self.Y, dtype=np.float64).reshape(-1)
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("response count differs from point count")
        if self.groups is None:
            self.groups = np.zeros(self.Y.shape[0], dtype=np.int64)
        self.groups = np.asarray(self.groups, dtype=np.int64).reshape(-1)
        if self.groups.shape != self.Y.shape:
            raise ValueError("groups must label every row")

    @classmethod
    def empty(cls, dims: int) -> "TrainingData":
        return cls(np.empty((0, dims)), np.empty(0))

    @classmethod
    def from_evaluations(cls, blocks) -> "TrainingData":
        """``blocks`` is a sequence of ``(X_j, Y_j)``, one per model evaluation."""
        blocks = list(blocks)
        if not blocks:
            raise ValueError("no evaluations given; use TrainingData.empty")
        X = np.vstack([np.atleast_2d(b[0]) for b in blocks])
        Y = np.concatenate([np.asarray(b[1], dtype=np.float64).reshape(-1) for b in blocks])
        groups = np.concatenate([np.full(len(np.asarray(b[1]).reshape(-1)), j) for j, b in enumerate(blocks)])
        return cls(X, Y, groups)

    @property
    def n_rows(self) -> int:
        return self.Y.shape[0]

    @property
    def n_evaluations(self) -> int:
        return len(np.unique(self.groups)) if self.n_rows else 0

    def row_weights(self) -> np.ndarray:
        """Per-row factor so that ``sum(w * r**2)`` is the data loss."""
        if not self.n_rows:
            return np.zeros(0)
        _, inv, counts = np.unique(self.groups, return_inverse=True, return_counts=True)
        return 1.0 / (len(counts) * counts[inv])


@dataclass
class LossBreakdown:
    L_T: float = 0.0
    L_PDE: float = 0.0
    L_IC: float = 0.0
    L_BC: float = 0.0
    penalty_total: float = 0.0
    weights: dict = field(default_factory=dict)
    active: tuple = ()

    def component(self, name: str) -> float:
        return getattr(self, f"L_{name}")

    @property
    def total(self) -> float:
        """Weighted regularized loss plus inequality penalty."""
        return sum(self.weights.get(k, 0.0) * self.component(k) for k in self.active) + self.penalty_total

    @property
    def modified_mse(self) -> float:
        """Unweighted summary: data misfit plus the mean of the active PDE/IC/BC terms."""
        phys = [self.component(k) for k in ("PDE", "IC", "BC") if k in self.active]
        return self.L_T + (sum(phys) / len(phys) if phys else 0.0)

    def as_dict(self) -> dict:
        out = {f"L_{k}": self.component(k) for k in COMPONENTS}
        out["penalty"] = self.penalty_total
        out.update({f"w_{k}": self.weights.get(k, 0.0) for k in COMPONENTS})
        out["total"] = self.total
        return out


def adaptive_weights(losses: LossBreakdown) -> dict:
    """Each active component's share of the summed active losses."""
    active = losses.active
    if not active:
        raise ValueError("no active loss components")
    vals = {k: losses.component(k) for k in active}
    s = sum(vals.values())
    if s <= 0 or not math.isfinite(s):
        return {k: (1.0 / len(active) if k in active else 0.0) for k in COMPONENTS}
    return {k: (vals[k] / s if k in active else 0.0) for k in COMPONENTS}


@dataclass
class TrainConfig:
    degree: int = 4
    weights: str | dict = "adaptive"
    max_iter: int | None = None
    gtol: float = 1e-8
    init: str = "auto"
    continuation_rounds: int = 3
    continuation_factor: float = 10.0
    violation_tol: float = 0.0
    seed: int = 0
    max_cardinality: int = 2_000_000

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if not self.gtol > 0:
            raise ValueError("gtol must be positive")
        if self.init not in ("auto", "zeros", "ols"):
            raise ValueError("init must be auto, zeros or ols")
        if isinstance(self.weights, str) and self.weights != "adaptive":
            raise ValueError("weights must be 'adaptive' or a mapping of fixed weights")

    def iteration_cap(self, n_coef: int) -> int:
        if self.max_iter is not None:
            return int(self.max_iter)
        return 5000 * max(1, math.ceil(n_coef / 100))


@dataclass
class TrainReport:
    iterations: int
    status: str
    converged: bool
    losses: LossBreakdown
    wall_time: float
    n_coef: int
    history: list = field(default_factory=list)
    rounds: int = 1
    violations: int = 0

    def summary(self) -> dict:
        out = {"iterations": self.iterations, "status": self.status, "converged": self.converged,
               "n_coef": self.n_coef, "wall_time_s": round(self.wall_time, 3),
               "rounds": self.rounds, "violations": self.violations}
        out.update(self.losses.as_dict())
        return out

    def write_history_csv(self, path) -> Path:
        path = Path(path)
        cols = ["iteration", "objective", "L_T", "L_PDE", "L_IC", "L_BC", "penalty", "grad_inf"]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in self.history:
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return path


class Objective:
    """Compiled PC² loss for a fixed basis, data set and constraint set."""

    def __init__(self, indices: MultiIndexSet, scaling: DomainScaling, data: TrainingData | None,
                 constraints: ConstraintSet | None):
        self.indices = indices
        self.scaling = scaling
        self.n_coef = len(indices)
        constraints = constraints or ConstraintSet()
        data = data if data is not None else TrainingData.empty(scaling.dims)
        if data.n_rows and data.X.shape[1] != scaling.dims:
            raise ValueError("training inputs do not match the basis dimension")
        self.data = data
        self.A = BasisTables(indices, scaling, data.X, 0).matrix() if data.n_rows else None
        self.row_w = data.row_weights()
        self.kinds = {}
        for kind in ("PDE", "IC", "BC"):
            comps = [CompiledResidual(c.expression, indices, scaling, c.points)
                     for c in constraints.of_kind(kind)]
            if comps:
                self.kinds[kind] = (comps, sum(c.n_points for c in comps))
        self.ineq = [(CompiledResidual(c.expression, indices, scaling, c.points), c.penalty)
                     for c in constraints.inequalities if len(c.points)]
        self.n_ineq = sum(c.n_points for c, _ in self.ineq)
        self.penalty_scale = 1.0
        self.active = tuple(k for k in COMPONENTS if (k == "T" and self.A is not None) or k in self.kinds)

    def losses(self, y) -> LossBreakdown:
        y = np.asarray(y, dtype=np.float64)
        out = LossBreakdown(active=self.active)
        if self.A is not None:
            r = self.A @ y - self.data.Y
            out.L_T = float(self.row_w @ (r * r))
        for kind, (comps, n) in self.kinds.items():
            s = sum(float(np.dot(v, v)) for v in (c.values(y) for c in comps))
            setattr(out, f"L_{kind}", s / n)
        out.penalty_total = self._penalty(y)
        return out

    def _penalty(self, y):
        if not self.n_ineq:
            return 0.0
        s = 0.0
        for comp, lam in self.ineq:
            h = np.minimum(comp.values(y), 0.0)
            s += lam * self.penalty_scale * float(h @ h)
        return s / self.n_ineq

    def value_and_grad(self, y, weights: dict):
        """Weighted objective and its gradient, weights held constant."""
        y = np.asarray(y, dtype=np.float64)
        f = 0.0
        g = np.zeros(self.n_coef)
        if self.A is not None and weights.get("T", 0.0):
            w = weights["T"]
            r = self.A @ y - self.data.Y
            wr = self.row_w * r
            f += w * float(wr @ r)
            g += (2.0 * w) * (self.A.T @ wr)
        for kind, (comps, n) in self.kinds.items():
            w = weights.get(kind, 0.0)
            if not w:
                continue
            scale = 2.0 * w / n
            for c in comps:
                r, gc = c.value_and_vjp(y, lambda r, s=scale: s * r)
                f += w * float(r @ r) / n
                g += gc
        if self.n_ineq:
            for comp, lam in self.ineq:
                fac = lam * self.penalty_scale / self.n_ineq
                h, gc = comp.value_and_vjp(y, lambda v, s=fac: 2.0 * s * np.minimum(v, 0.0))
                hh = np.minimum(h, 0.0)
                f += fac * float(hh @ hh)
                g += gc
        return f, g

    def gauss_newton_diag(self, y, weights: dict) -> np.ndarray:
        d = np.zeros(self.n_coef)
        if self.A is not None and weights.get("T", 0.0):
            d += 2.0 * weights["T"] * (self.row_w @ (self.A * self.A))
        for kind, (comps, n) in self.kinds.items():
            w = weights.get(kind, 0.0)
            for c in comps:
                J = c.jacobian(y)
                d += (2.0 * w / n) * np.einsum("ij,ij->j", J, J)
        for comp, lam in self.ineq:
            J = comp.jacobian(y)
            d += (2.0 * lam * self.penalty_scale / self.n_ineq) * np.einsum("ij,ij->j", J, J)
        return d

    def violations(self, y, tol: float = 0.0) -> int:
        return int(sum(np.count_nonzero(c.values(y) < -tol) for c, _ in self.ineq))


def compute_losses(coefficients, data: TrainingData | None, constraints: ConstraintSet | None,
                   indices: MultiIndexSet, scaling: DomainScaling) -> LossBreakdown:
    obj = Objective(indices, scaling, data, constraints)
    out = obj.losses(coefficients)
    out.weights = adaptive_weights(out) if out.active else {}
    return out


def _initial(obj: Objective, config: TrainConfig) -> np.ndarray:
    y0 = np.zeros(obj.n_coef)
    if config.init == "zeros":
        return y0
    if obj.A is not None and obj.data.n_rows >= obj.n_coef:
        sw = np.sqrt(obj.row_w)
        try:
            return ols_solve(DesignSystem(obj.A * sw[:, None], obj.data.Y * sw))
        except (RankDeficient, UnderdeterminedSystem):
            if config.init == "ols":
                raise
    elif config.init == "ols":
        raise UnderdeterminedSystem("not enough data rows for an OLS warm start")
    return y0


def train(config: TrainConfig, data: TrainingData | None, constraints: ConstraintSet | None,
          scaling: DomainScaling, variables=(), n_physical: int | None = None,
          indices: MultiIndexSet | None = None, y0=None):
    """Fit PC² coefficients; returns ``(SurrogateModel, TrainReport)``.

    Raises :class:`pc2.optimize.NonFinite` on NaN/Inf losses.  Hitting the
    iteration cap is reported through ``report.converged`` rather than raised.
    """
    t0 = time.perf_counter()
    if indices is None:
        indices = total_degree_index_set(scaling.dims, config.degree, config.max_cardinality)
    obj = Objective(indices, scaling, data, constraints)
    if not obj.active:
        raise ValueError("nothing to train on: no data and no equality constraints")
    y = _initial(obj, config) if y0 is None else np.array(y0, dtype=np.float64)
    history = []
    fixed = None if config.weights == "adaptive" else {k: float(config.weights.get(k, 0.0)) for k in COMPONENTS}

    def current_weights(yk):
        if fixed is not None:
            return fixed
        return adaptive_weights(obj.losses(yk))

    def prepare(yk):
        w = current_weights(yk)
        return lambda z: obj.value_and_grad(z, w)

    def record(k, yk, f, g):
        L = obj.losses(yk)
        history.append((k, f, L.L_T, L.L_PDE, L.L_IC, L.L_BC, L.penalty_total, float(np.max(np.abs(g)))))

    cap = config.iteration_cap(obj.n_coef)
    rounds = 0
    total_iters = 0
    while True:
        rounds += 1
        w0 = current_weights(y)
        diag = obj.gauss_newton_diag(y, w0)
        dinv = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
        res = minimize_bfgs(prepare, y, dinv, gtol=config.gtol, max_iter=cap, callback=record)
        y = res.x
        total_iters += res.iterations
        n_viol = obj.violations(y, config.violation_tol)
        if not n_viol or rounds > config.continuation_rounds:
            break
        log.info("%d inequality violations after round %d; raising penalty", n_viol, rounds)
        obj.penalty_scale *= config.continuation_factor
    losses = obj.losses(y)
    losses.weights = current_weights(y)
    if not np.isfinite(losses.total):
        raise NonFinite("final loss is not finite")
    report = TrainReport(total_iters, res.status, res.converged, losses, time.perf_counter() - t0,
                         obj.n_coef, history, rounds, n_viol)
    if n_physical is None:
        n_physical = scaling.dims
    meta = {"degree": int(config.degree), "seed": int(config.seed), "status": res.status,
            "converged": bool(res.converged), "iterations": int(total_iters),
            "objective": float(losses.total)}
    model = SurrogateModel(scaling, indices, y, tuple(variables), n_physical, meta)
    return model, report
