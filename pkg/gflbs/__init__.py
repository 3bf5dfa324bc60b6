__version__ = "0.1.0"

from .matrices import NumericalError, svd, soft_threshold
from .problems import observation, sml_problem
from .proxes import gfl_params, prox_gfl, prox_nuclear
from .results import decomposition, status, trace_record
from .solvers import extract_mask, fista_lasso, solve_sml, solve_uml, solver_config
from .weights import build_neighborhood, compute_weights

__all__ = [
    "NumericalError",
    "svd",
    "soft_threshold",
    "observation",
    "sml_problem",
    "gfl_params",
    "prox_gfl",
    "prox_nuclear",
    "decomposition",
    "status",
    "trace_record",
    "extract_mask",
    "fista_lasso",
    "solve_sml",
    "solve_uml",
    "solver_config",
    "build_neighborhood",
    "compute_weights",
]
