from .beam import BeamProblem, NonPositiveStiffness, beam_solve, uniform_midspan_deflection, uniform_moment
from .burgers import NewtonNonconvergence, burgers_solve, cole_hopf_sine
from .cache import cache_key, cached_solve, default_cache_dir
from .grid import GridSolution
from .heat import heat2d_analytic_cos, heat2d_solve
from .mcs import MCSError, MCSResult, mcs_moments

__all__ = [
    "BeamProblem", "GridSolution", "MCSError", "MCSResult", "NewtonNonconvergence",
    "NonPositiveStiffness", "beam_solve", "burgers_solve", "cache_key", "cached_solve",
    "cole_hopf_sine", "default_cache_dir", "heat2d_analytic_cos", "heat2d_solve", "mcs_moments",
    "uniform_midspan_deflection", "uniform_moment",
]
