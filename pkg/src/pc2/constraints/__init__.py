from .build import (ConstraintSet, EqualityConstraint, InequalityConstraint, Problem,
                    ProblemError, Variable, build_constraint_set, build_inequality_constraints,
                    build_pde_constraints)
from .expr import (CompiledResidual, Constant, Coordinate, MalformedExpression, Negate, Node,
                   Power, Product, SourceTerm, Sum, SurrogateTerm, degree, hinge, residual_eval,
                   validate)
from .parse import ResidualParser, parse_source

__all__ = [
    "CompiledResidual", "Constant", "ConstraintSet", "Coordinate", "EqualityConstraint",
    "InequalityConstraint", "MalformedExpression", "Negate", "Node", "Power", "Problem",
    "ProblemError", "Product", "ResidualParser", "SourceTerm", "Sum", "SurrogateTerm",
    "Variable", "build_constraint_set", "build_inequality_constraints", "build_pde_constraints",
    "degree", "hinge", "parse_source", "residual_eval", "validate",
]
