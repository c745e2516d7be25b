"""Outer adaptive loop: solve, estimate, mark, refine, interpolate; reset on failure."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import ElementData, apply_cutoff, assemble_penalty
from .estimator import compute_indicators, mark_for_refinement, select_regularized_dofs
from .mesh import (DofMap, Mesh, create_structured_unit_square, interpolate, refine,
                   refine_coarsest, uniform_refine)
from .problems import ProblemSpec, h1_error
from .regnewton import IterationResult, SolverConfig, Status, run_iterations

log = logging.getLogger(__name__)

INITIAL = "Initial"
PRE_ASYMPTOTIC = "Pre-asymptotic"
ASYMPTOTIC = "Asymptotic"

RESET_STATUSES = (Status.MAX_ITER, Status.STEP_FAILURE)


class AdaptiveAbort(RuntimeError):
    pass


@dataclass
class AdaptiveConfig:
    max_levels: int = 30
    theta: float = 0.5
    solver: SolverConfig = field(default_factory=SolverConfig)
    initial_subdivisions: int = 3
    initial_bisections: int = 1
    quadrature_order: int = 2
    target_h1_error: Optional[float] = None
    max_elements: Optional[int] = None
    enable_cutoff: bool = True

    def __post_init__(self):
        if self.max_levels < 1:
            raise ValueError(f"max_levels must be >= 1, got {self.max_levels}")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.initial_subdivisions < 1:
            raise ValueError("initial_subdivisions must be >= 1")


@dataclass
class LevelSummary:
    level: int
    n_iterations: int
    final_residual: float
    final_alpha: float
    regularized_dof_count: int
    total_dof: int
    status: Status
    n_elements: int
    h1_error: Optional[float] = None
    estimator_total: Optional[float] = None
    phase_label: str = ""
    cutoff_applied: bool = False
    iterations: Optional[IterationResult] = field(default=None, repr=False)


def classify_phase(summaries) -> list:
    """Label each level Initial / Pre-asymptotic / Asymptotic from its status.

    Initial: every level up to and including the last reset.  Asymptotic: the
    trailing run of Converged levels.  Everything in between is Pre-asymptotic.
    """
    statuses = [s.status if hasattr(s, "status") else Status(s) for s in summaries]
    n = len(statuses)
    resets = [i for i, st in enumerate(statuses) if st in RESET_STATUSES]
    last_reset = resets[-1] if resets else -1
    first_tail = n
    while first_tail > last_reset + 1 and statuses[first_tail - 1] is Status.CONVERGED:
        first_tail -= 1
    return [
        INITIAL if i <= last_reset else ASYMPTOTIC if i >= first_tail else PRE_ASYMPTOTIC
        for i in range(n)
    ]


def initial_mesh(config: AdaptiveConfig) -> Mesh:
    mesh = create_structured_unit_square(config.initial_subdivisions)
    return uniform_refine(mesh, passes=config.initial_bisections) if config.initial_bisections else mesh


def adaptive_solve(spec: ProblemSpec, config: AdaptiveConfig,
                   on_level: Optional[Callable] = None):
    """Run the adaptive algorithm.  Returns ``(mesh, u_vertex, summaries)``.

    ``on_level(summary, mesh, u_vertex, indicators)`` is called after each level.
    """
    mesh = initial_mesh(config)
    u_vertex = np.zeros(mesh.n_vertices)
    post_reset = False
    summaries = []

    for level in range(1, config.max_levels + 1):
        dofmap = DofMap.from_mesh(mesh)
        geo = ElementData.build(mesh, config.quadrature_order)
        u0 = dofmap.restrict(u_vertex)

        R = assemble_penalty(mesh, dofmap)
        reg_count = dofmap.n_dof
        cutoff = config.enable_cutoff and not post_reset
        if cutoff:
            ind0 = compute_indicators(mesh, dofmap, u0, spec, config.quadrature_order)
            regularized, cut = select_regularized_dofs(mesh, dofmap, ind0)
            R = apply_cutoff(R, cut)
            reg_count = len(regularized)

        result = run_iterations(mesh, dofmap, u0, spec, R, config.solver, geo)
        u_level = dofmap.to_vertex(result.u)
        ind = compute_indicators(mesh, dofmap, result.u, spec, config.quadrature_order)
        err = None
        if spec.exact_u is not None and spec.exact_grad_u is not None:
            err = h1_error(mesh, u_level, spec)

        summary = LevelSummary(
            level=level,
            n_iterations=len(result.records),
            final_residual=result.final_residual,
            final_alpha=result.final_alpha,
            regularized_dof_count=reg_count,
            total_dof=dofmap.n_dof,
            status=result.status,
            n_elements=mesh.n_elements,
            h1_error=err,
            estimator_total=ind.total,
            cutoff_applied=cutoff,
            iterations=result,
        )
        summaries.append(summary)
        log.info("level %d: %d elements, %s after %d its, |F|=%.3e, reg %d/%d, method %s",
                 level, mesh.n_elements, result.status.value, summary.n_iterations,
                 summary.final_residual, reg_count, dofmap.n_dof, result.method.value)
        if on_level is not None:
            on_level(summary, mesh, u_level, ind)

        done = level == config.max_levels
        if config.target_h1_error is not None and err is not None and err <= config.target_h1_error \
                and result.status is Status.CONVERGED:
            done = True
        if done:
            u_vertex = u_level
            break

        if result.status in RESET_STATUSES:
            new_mesh = refine_coarsest(mesh)
            if new_mesh.n_elements <= mesh.n_elements:
                raise AdaptiveAbort(f"level {level} failed and the mesh cannot be refined")
            next_u = np.zeros(new_mesh.n_vertices)
            post_reset = True
        else:
            marked = mark_for_refinement(ind, config.theta)
            if marked.size == 0:
                # exact discrete solution; keep refining uniformly so the loop progresses
                marked = np.arange(mesh.n_elements)
            new_mesh = refine(mesh, marked)
            next_u = interpolate(mesh, u_level, new_mesh)
            post_reset = False
        if config.max_elements is not None and new_mesh.n_elements > config.max_elements:
            u_vertex = u_level
            break
        mesh = new_mesh
        u_vertex = next_u

    for s, phase in zip(summaries, classify_phase(summaries)):
        s.phase_label = phase
    return mesh, u_vertex, summaries
