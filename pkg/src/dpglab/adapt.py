"""
Bulk (Doerfler) marking and the SOLVE -> ESTIMATE -> MARK -> REFINE loop.

The marking step selects a minimal-cardinality element set M with

    theta * eta^2 <= sum_{T in M} eta(T)^2,

found by sorting the local contributions eta(T)^2 in descending order and
taking the shortest prefix that reaches the threshold.  Ties are broken by
ascending element index, so marking is deterministic under permutations of
equal values.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from .dpg import TrialSpace, assemble_solve
from .mesh import refine_marked
from .postprocess import postprocess_all
from .problems import error_report


def mark(eta_local, theta):
    """Minimal element set carrying a theta fraction of the squared estimator.

    Parameters
    ----------
    eta_local : (nt,) array of nonnegative local estimator values eta(T).
    theta : float in (0, 1).

    Returns
    -------
    (k,) int array of marked element indices in ascending order; empty when
    all local contributions vanish.
    """
    eta_local = np.asarray(eta_local, dtype=float)
    if not 0.0 < theta < 1.0:
        raise ValueError("marking parameter theta must lie in (0, 1)")
    if np.any(eta_local < 0.0):
        raise ValueError("local estimator values must be nonnegative")
    eta_sq = eta_local ** 2
    order = np.lexsort((np.arange(eta_sq.size), -eta_sq))
    running = np.cumsum(eta_sq[order])
    total = running[-1] if running.size else 0.0
    if total == 0.0:
        return np.empty(0, dtype=np.int64)
    # shortest prefix of the sorted contributions reaching theta * total;
    # total is read off the same cumulative sum so the prefix always exists
    k = int(np.searchsorted(running, theta * total, side="left")) + 1
    return np.sort(order[:k])


@dataclass
class AdaptiveStep:
    """One SOLVE/ESTIMATE pass of the adaptive loop."""
    mesh: object
    solution: object
    postprocessed: object
    eta: float
    eta_local: np.ndarray
    report: object


@dataclass
class AdaptiveRun:
    steps: List[AdaptiveStep]

    def dofs(self):
        return np.array([s.solution.num_dofs for s in self.steps])


def adaptive_loop(problem, trial, theta=0.25, max_dofs=10000,
                  max_steps=None, postprocess=False, mesh=None,
                  solver_tol=1e-10, delta_p=2,
                  error_exactness_bump=0):
    """Run the adaptive algorithm on a manufactured problem.

    Each iteration solves on the current mesh, records the error report
    and estimator, and stops once num_dofs >= max_dofs (or after
    max_steps solves); otherwise it bulk-marks and refines by
    newest-vertex bisection.

    Returns
    -------
    AdaptiveRun with one AdaptiveStep per solve; dof counts increase
    strictly from step to step.
    """
    if isinstance(trial, int):
        trial = TrialSpace(trial)
    if mesh is None:
        mesh = problem.initial_mesh()
    dirichlet = problem.dirichlet
    steps = []
    while True:
        solution = assemble_solve(mesh, trial, problem.kind, problem.source,
                                  dirichlet=dirichlet, delta_p=delta_p,
                                  solver_tol=solver_tol)
        post = postprocess_all(solution) if postprocess else None
        report = error_report(solution, post, problem,
                              extra_exactness=error_exactness_bump)
        steps.append(AdaptiveStep(mesh=mesh, solution=solution,
                                  postprocessed=post, eta=solution.eta,
                                  eta_local=solution.eta_local,
                                  report=report))
        if solution.num_dofs >= max_dofs:
            break
        if max_steps is not None and len(steps) >= max_steps:
            break
        marked = mark(solution.eta_local, theta)
        if marked.size == 0:
            break      # estimator vanished everywhere: converged
        mesh = refine_marked(mesh, marked)
    return AdaptiveRun(steps=steps)
