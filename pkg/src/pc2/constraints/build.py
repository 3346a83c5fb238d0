"""Problem declarations and their expansion into collocated constraints."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..basis import DomainScaling, PolynomialFamily
from ..sampling import sample_inputs
from .expr import Node, validate
from .parse import ResidualParser, parse_source

KINDS = ("PDE", "IC", "BC")


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float
    upper: float
    family: str = "legendre"
    kind: str = "physical"
    time: bool = False

    def __post_init__(self):
        if self.kind not in ("physical", "stochastic"):
            raise ProblemError(f"variable {self.name!r}: kind must be physical or stochastic")
        if self.time and self.kind != "physical":
            raise ProblemError("the time variable must be physical")
        PolynomialFamily.parse(self.family)
        if not float(self.lower) < float(self.upper):
            raise ProblemError(f"variable {self.name!r}: lower must be < upper")


@dataclass
class EqualityConstraint:
    expression: Node
    kind: str
    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProblemError(f"equality kind must be one of {KINDS}")
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))


@dataclass
class InequalityConstraint:
    """``expression >= 0`` enforced by a squared-hinge penalty."""

    expression: Node
    penalty: float
    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        if not self.penalty > 0:
            raise ProblemError("penalty factors must be positive")
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))


@dataclass
class ConstraintSet:
    equalities: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)

    def of_kind(self, kind: str) -> list:
        return [c for c in self.equalities if c.kind == kind and len(c.points)]

    @property
    def active_kinds(self) -> tuple:
        return tuple(k for k in KINDS if self.of_kind(k))

    def __len__(self):
        return len(self.equalities) + len(self.inequalities)


@dataclass
class Problem:
    """Declarative problem: inputs, known functions and constraint blocks.

    ``pde``/``ic`` are ``{"residual": str, "points": int}``; ``bc`` is
    ``{"points": int, "faces": [{"at": "x=lower", "residual": str}, ...]}``;
    each inequality is ``{"residual": str, "points": int, "penalty": float}``
    with an optional ``boundary_points`` count for face/corner points.
    """

    variables: list
    parameters: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)
    pde: dict | None = None
    ic: dict | None = None
    bc: dict | None = None
    inequalities: list = field(default_factory=list)

    def __post_init__(self):
        self.variables = [v if isinstance(v, Variable) else Variable(**v) for v in self.variables]
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ProblemError("duplicate variable names")
        kinds = [v.kind for v in self.variables]
        if "stochastic" in kinds and "physical" in kinds[kinds.index("stochastic"):]:
            raise ProblemError("physical variables must precede stochastic ones")
        if sum(v.time for v in self.variables) > 1:
            raise ProblemError("at most one time variable")

    @property
    def names(self) -> list:
        return [v.name for v in self.variables]

    @property
    def n_physical(self) -> int:
        return sum(v.kind == "physical" for v in self.variables)

    @property
    def scaling(self) -> DomainScaling:
        return DomainScaling(tuple((v.lower, v.upper) for v in self.variables),
                             tuple(v.family for v in self.variables))

    @property
    def time_dim(self):
        for i, v in enumerate(self.variables):
            if v.time:
                return i
        return None

    @property
    def space_dims(self) -> list:
        return [i for i, v in enumerate(self.variables) if v.kind == "physical" and not v.time]

    def resolved_sources(self) -> dict:
        out = {}
        for name, src in self.sources.items():
            if callable(src):
                out[name] = src
            else:
                out[name] = parse_source(str(src), self.names, self.parameters, out)
        return out

    def parser(self) -> ResidualParser:
        return ResidualParser(self.names, self.parameters, self.resolved_sources())

    def parse(self, text: str) -> Node:
        node = self.parser().parse(text)
        validate(node, len(self.variables))
        return node

    def face(self, spec: str):
        """``"x=lower"`` -> (dimension index, coordinate value)."""
        try:
            name, side = (s.strip() for s in spec.split("="))
        except ValueError:
            raise ProblemError(f"face must look like 'x=lower', got {spec!r}") from None
        if name not in self.names:
            raise ProblemError(f"unknown face variable {name!r}")
        var = self.variables[self.names.index(name)]
        if side not in ("lower", "upper"):
            try:
                value = float(side)
            except ValueError:
                raise ProblemError(f"face side must be lower, upper or a number: {spec!r}") from None
        else:
            value = var.lower if side == "lower" else var.upper
        return self.names.index(name), float(value)


def _split(total: int, parts: int) -> list:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def build_pde_constraints(problem: Problem, seed: int = 0) -> list:
    """Equality constraints with their collocation sets."""
    scaling = problem.scaling
    out = []
    if problem.pde:
        n = int(problem.pde.get("points", 0))
        expr = problem.parse(problem.pde["residual"])
        if n > 0:
            X = sample_inputs(scaling, n, seed, "domain")
            out.append(EqualityConstraint(expr, "PDE", X, "pde"))
    if problem.ic:
        td = problem.time_dim
        if td is None:
            raise ProblemError("initial condition given but no time variable declared")
        n = int(problem.ic.get("points", 0))
        expr = problem.parse(problem.ic["residual"])
        if n > 0:
            X = sample_inputs(scaling, n, seed, "IC", {td: problem.variables[td].lower})
            out.append(EqualityConstraint(expr, "IC", X, "ic"))
    bc = problem.bc or {}
    faces = bc.get("faces", [])
    if problem.pde and problem.space_dims:
        covered = set()
        for f in faces:
            d, v = problem.face(f["at"])
            covered.add((d, v))
        for d in problem.space_dims:
            var = problem.variables[d]
            for side in (var.lower, var.upper):
                if (d, side) not in covered:
                    raise ProblemError(f"no boundary condition for {var.name}={side}")
    n_total = int(bc.get("points", 0))
    if faces and n_total > 0:
        for f, n in zip(faces, _split(n_total, len(faces))):
            d, v = problem.face(f["at"])
            expr = problem.parse(f["residual"])
            if n > 0:
                X = sample_inputs(scaling, n, seed, f"BC:{f['at']}", {d: v})
                out.append(EqualityConstraint(expr, "BC", X, f"bc {f['at']}"))
    return out


def _box_boundary_points(problem: Problem, n: int, seed: int, tag: str) -> np.ndarray:
    """Corners of the box plus ``n`` LHS points split over its faces."""
    scaling = problem.scaling
    lo, hi = scaling.lower, scaling.upper
    dims = scaling.dims
    corners = np.array([[hi[d] if (k >> d) & 1 else lo[d] for d in range(dims)]
                        for k in range(2 ** dims)]) if dims <= 10 else np.empty((0, dims))
    faces = [(d, v) for d in range(dims) for v in (lo[d], hi[d])]
    blocks = [corners]
    for (d, v), m in zip(faces, _split(n, len(faces))):
        if m > 0:
            blocks.append(sample_inputs(scaling, m, seed, f"{tag}:face{d}={v!r}", {d: v}))
    return np.vstack(blocks)


def build_inequality_constraints(problem: Problem, seed: int = 0) -> list:
    """Inequality constraints on interior LHS points.

    ``boundary_points > 0`` additionally places points on every face of the
    input box and at its corners, where derivative-sign conditions of a
    polynomial are typically tightest.
    """
    out = []
    for i, spec in enumerate(problem.inequalities):
        expr = problem.parse(spec["residual"])
        n = int(spec.get("points", 0))
        X = sample_inputs(problem.scaling, n, seed, f"INEQ:{i}") if n > 0 else np.empty((0, len(problem.variables)))
        nb = int(spec.get("boundary_points", 0))
        if nb > 0:
            X = np.vstack([X, _box_boundary_points(problem, nb, seed, f"INEQ:{i}")])
        out.append(InequalityConstraint(expr, float(spec.get("penalty", 1.0)), X,
                                        spec.get("label", f"ineq{i}")))
    return out


def build_constraint_set(problem: Problem, seed: int = 0) -> ConstraintSet:
    return ConstraintSet(build_pde_constraints(problem, seed), build_inequality_constraints(problem, seed))
