"""Space-time isogeometric Galerkin solver for a nonlocal parabolic problem.

The package discretizes ``du/dt - a(l(u)) Lap(u) = f`` (zero boundary and
initial conditions, ``l(u)`` the spatial mean functional) with tensor-product
B-splines in space and time, linearizes with fixed-point iteration, and
solves each linear step with GMRES preconditioned by a Kronecker
fast-diagonalization method built on an arrowhead factorization of the time
pencil.
"""

from .splines import Basis1D, KnotVector, make_open_uniform, right_endpoint_trace
from .quadrature import QuadratureRule1D, element_rule, gauss_legendre
from .geometry import Parametrization, builtin_domain, eval_geometry
from .problems import ProblemSpec, builtin_problem, eval_forcing
from .nonlinear import PicardConfig, SolveReport, picard_solve
from .discretize import Discretization, discretize
from .postproc import error_norms, observed_order

__all__ = [
    "Basis1D",
    "KnotVector",
    "make_open_uniform",
    "right_endpoint_trace",
    "QuadratureRule1D",
    "element_rule",
    "gauss_legendre",
    "Parametrization",
    "builtin_domain",
    "eval_geometry",
    "ProblemSpec",
    "builtin_problem",
    "eval_forcing",
    "PicardConfig",
    "SolveReport",
    "picard_solve",
    "Discretization",
    "discretize",
    "error_norms",
    "observed_order",
]

__version__ = "0.1.0"
