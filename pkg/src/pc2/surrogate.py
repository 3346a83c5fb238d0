"""Surrogate container, regression design, least squares and persistence."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .basis import BasisTables, DomainScaling, MultiIndexSet, design_matrix

SCHEMA_VERSION = 1
FORMAT_TAG = "pc2-surrogate"


class UnderdeterminedSystem(ValueError):
    """Fewer regression rows than basis functions; the solution is not unique."""


class RankDeficient(ValueError):
    """Design matrix is numerically rank deficient."""


class ModelFormatError(ValueError):
    """Model file is malformed, truncated or of an unknown schema version."""


class ChecksumMismatch(ModelFormatError):
    pass


@dataclass(frozen=True)
class SurrogateModel:
    """Polynomial surrogate ``sum_a y_a Psi_a(X)``.

    The first ``n_physical`` dimensions are deterministic physical
    coordinates (space, time); the rest are stochastic inputs.
    """

    scaling: DomainScaling
    indices: MultiIndexSet
    coefficients: np.ndarray
    variables: tuple = ()
    n_physical: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=np.float64, copy=True).reshape(-1)
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        if coef.shape[0] != len(self.indices):
            raise ValueError(f"{coef.shape[0]} coefficients for {len(self.indices)} basis functions")
        if self.indices.dims != self.scaling.dims:
            raise ValueError("index tuples and scaling have different dimension counts")
        names = tuple(self.variables) or tuple(f"x{d}" for d in range(self.scaling.dims))
        if len(names) != self.scaling.dims or len(set(names)) != len(names):
            raise ValueError("variable names must be unique, one per dimension")
        object.__setattr__(self, "variables", names)
        if not 0 <= self.n_physical <= self.scaling.dims:
            raise ValueError("n_physical out of range")

    @property
    def dims(self) -> int:
        return self.scaling.dims

    def with_coefficients(self, coefficients, **metadata) -> "SurrogateModel":
        meta = dict(self.metadata)
        meta.update(metadata)
        return SurrogateModel(self.scaling, self.indices, coefficients, self.variables,
                              self.n_physical, meta)

    def __call__(self, X):
        return evaluate(self, X)


@dataclass(frozen=True)
class DesignSystem:
    matrix: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=np.float64)
        y = np.asarray(self.responses, dtype=np.float64).reshape(-1)
        if A.ndim != 2 or A.shape[0] != y.shape[0]:
            raise ValueError("design matrix rows and responses differ")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "responses", y)


def build_design_matrix(indices: MultiIndexSet, scaling: DomainScaling, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != scaling.dims:
        raise ValueError(f"points have {points.shape[1]} coordinates, basis has {scaling.dims}")
    return design_matrix(indices, scaling, points)


def ols_solve(system: DesignSystem, rcond: float = 1e-10) -> np.ndarray:
    """Least-squares coefficients via column-pivoted QR."""
    A, b = system.matrix, system.responses
    n, p = A.shape
    if n < p:
        raise UnderdeterminedSystem(f"{n} rows for {p} unknowns")
    if p == 0:
        return np.zeros(0)
    Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = rcond * np.linalg.norm(A)
    rank = int(np.count_nonzero(diag > tol))
    if rank < p:
        raise RankDeficient(f"numerical rank {rank} < {p}")
    z = scipy.linalg.solve_triangular(R, Q.T @ b)
    y = np.empty(p)
    y[perm] = z
    return y


def _points(model: SurrogateModel, X):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.dims:
        raise ValueError(f"points have {X.shape[1]} coordinates, model has {model.dims}")
    return X, single


def evaluate(model: SurrogateModel, X):
    """Surrogate value at one point (1-D input) or many (rows)."""
    X, single = _points(model, X)
    out = design_matrix(model.indices, model.scaling, X) @ model.coefficients
    return float(out[0]) if single else out


def evaluate_partial(model: SurrogateModel, X, orders):
    X, single = _points(model, X)
    orders = tuple(int(o) for o in orders)
    if len(orders) != model.dims:
        raise ValueError("orders length differs from dimension count")
    tabs = BasisTables(model.indices, model.scaling, X, max(orders))
    out = tabs.matrix(orders) @ model.coefficients
    return float(out[0]) if single else out


# -- persistence -----------------------------------------------------------

def _payload(model: SurrogateModel) -> dict:
    return {
        "format": FORMAT_TAG,
        "schema_version": SCHEMA_VERSION,
        "variables": list(model.variables),
        "n_physical": int(model.n_physical),
        "families": [f.value for f in model.scaling.families],
        "bounds": [[float(lo).hex(), float(hi).hex()] for lo, hi in model.scaling.bounds],
        "indices": [" ".join(str(v) for v in row) for row in model.indices],
        "coefficients": [float(c).hex() for c in model.coefficients],
        "metadata": model.metadata,
    }


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=True, allow_nan=False)


def dumps(model: SurrogateModel) -> str:
    payload = _payload(model)
    payload["checksum"] = hashlib.sha256(_canonical(payload).encode("ascii")).hexdigest()
    return _canonical(payload) + "\n"


def loads(text: str) -> SurrogateModel:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"unreadable model file: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_TAG:
        raise ModelFormatError("not a pc2 surrogate file")
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise ModelFormatError(f"unsupported schema version {payload.get('schema_version')!r}")
    checksum = payload.pop("checksum", None)
    if checksum != hashlib.sha256(_canonical(payload).encode("ascii")).hexdigest():
        raise ChecksumMismatch("model checksum does not match contents")
    try:
        bounds = [(float.fromhex(lo), float.fromhex(hi)) for lo, hi in payload["bounds"]]
        scaling = DomainScaling(tuple(bounds), tuple(payload["families"]))
        rows = [[int(v) for v in s.split()] for s in payload["indices"]]
        indices = MultiIndexSet(rows, dims=scaling.dims)
        coef = np.array([float.fromhex(c) for c in payload["coefficients"]])
        return SurrogateModel(scaling, indices, coef, tuple(payload["variables"]),
                              int(payload["n_physical"]), payload["metadata"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model contents: {exc}") from None


def save(model: SurrogateModel, path) -> Path:
    path = Path(path)
    path.write_text(dumps(model), encoding="ascii")
    return path


def load(path) -> SurrogateModel:
    return loads(Path(path).read_text(encoding="ascii"))


def write_predictions_csv(path, X, values, names) -> Path:
    path = Path(path)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + ["prediction"])
        for row, v in zip(X, values):
            w.writerow([repr(float(c)) for c in row] + [repr(float(v))])
    return path
