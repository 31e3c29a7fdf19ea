"""
dpg-lab: an ultra-weak DPG solver for reaction-diffusion and Poisson
problems on 2D triangular meshes, with augmented trial spaces, elementwise
superconvergent postprocessing, the built-in residual error estimator, and
adaptive newest-vertex-bisection refinement.
"""

from .adapt import AdaptiveRun, AdaptiveStep, adaptive_loop, mark
from .dpg import (POISSON, REACTION_DIFFUSION, DofMap, Solution, SolverError,
                  TrialSpace, assemble_solve, condense, estimator, local_b,
                  local_gram, local_load)
from .mesh import (Mesh, load_mesh, lshape_mesh, refine_marked,
                   refine_uniform, save_mesh, unit_square_mesh)
from .postprocess import (PostprocessedField, postprocess_all,
                          postprocess_element)
from .problems import (ErrorReport, ManufacturedProblem, error_report,
                       lshape_singular, square_smooth)
from .spaces import (EdgeBasis, ElementMap, QuadratureRule, ScalarBasis,
                     edge_basis, edge_bubbles, edge_quadrature, project_l2,
                     scalar_basis, triangle_quadrature)
from .study import (ConvergenceRecord, StudyConfig, fit_slope, read_csv,
                    run_study, write_csv)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveRun", "AdaptiveStep", "adaptive_loop", "mark",
    "POISSON", "REACTION_DIFFUSION", "DofMap", "Solution", "SolverError",
    "TrialSpace", "assemble_solve", "condense", "estimator", "local_b",
    "local_gram", "local_load",
    "Mesh", "load_mesh", "lshape_mesh", "refine_marked", "refine_uniform",
    "save_mesh", "unit_square_mesh",
    "PostprocessedField", "postprocess_all", "postprocess_element",
    "ErrorReport", "ManufacturedProblem", "error_report", "lshape_singular",
    "square_smooth",
    "EdgeBasis", "ElementMap", "QuadratureRule", "ScalarBasis", "edge_basis",
    "edge_bubbles", "edge_quadrature", "project_l2", "scalar_basis",
    "triangle_quadrature",
    "ConvergenceRecord", "StudyConfig", "fit_slope", "read_csv", "run_study",
    "write_csv",
]
