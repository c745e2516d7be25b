"""Regularized Newton-like iterations on a fixed mesh.

Three update rules are available for the linearized system A w = F at the
current iterate:

* ``Standard`` -- plain Newton, A w = F;
* ``TR``       -- (alpha R + A) w = F, sparse, for positive Jacobians;
* ``NTR``      -- (alpha R^T R + A^T A) w = A^T F, the Tikhonov minimizer of
  ||F - A w||^2 + alpha ||R w||^2, robust for indefinite Jacobians.

The penalty scale alpha_n = gamma_n ||F^n|| follows a clamped residual-ratio
schedule, and the iteration stops either at a residual tolerance or when the
residual decrease slows (gamma starts to grow again on a decreasing residual).
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .assembly import DEFAULT_QUADRATURE, ElementData, assemble_jacobian, assemble_residual
from .linalg import (Factorization, SingularSystemError, normal_rhs, normal_system,
                     regularization_factor)
from .mesh import DofMap, Mesh
from .problems import ProblemSpec

log = logging.getLogger(__name__)


class Method(str, enum.Enum):
    STANDARD = "Standard"
    TR = "TR"
    NTR = "NTR"


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    STALLED = "Stalled"
    CONTINUE = "Continue"
    MAX_ITER = "MaxIter"
    STEP_FAILURE = "StepFailure"


@dataclass
class SolverConfig:
    tol: float = 1e-7
    max_iter: int = 20
    switch_threshold: float = 50.0
    gamma0: float = 1.0
    alpha_cap: Optional[float] = None
    compute_Jn: bool = False
    method_override: Optional[Method] = None
    alpha_mode: str = "gamma"          # or "ratio_squared"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.gamma0 <= 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if self.alpha_mode not in ("gamma", "ratio_squared"):
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}")
        if self.method_override is not None:
            self.method_override = Method(self.method_override)


@dataclass
class GammaState:
    gamma: float
    prev_residual_norm: float


@dataclass
class IterationRecord:
    iter: int
    residual_norm: float           # ||F^{n+1}||
    step_ratio: float              # E_n
    gamma: float                   # gamma_n used for this step
    alpha: float                   # alpha_n used for this step
    method: Method
    Jn: Optional[float] = None
    step_absolute: bool = False    # E_n is an absolute step norm because ||u^n|| = 0


@dataclass
class IterationResult:
    u: np.ndarray
    records: list = field(default_factory=list)
    status: Status = Status.CONTINUE
    method: Method = Method.NTR
    initial_residual: float = 0.0

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual_norm if self.records else self.initial_residual

    @property
    def final_alpha(self) -> float:
        return self.records[-1].alpha if self.records else 0.0

    @property
    def gammas(self) -> list:
        return [r.gamma for r in self.records]


def update_gamma(state: GammaState, resid_norm: float, alpha_cap: Optional[float] = None):
    """Next (gamma_n, alpha_n) from ||F^n|| and the previous state.

    raw = ||F^n|| / ||F^{n-1}||.  On a decrease (or tie) gamma is clamped to
    [gamma_{n-1}/2, 1]; on an increase it is capped at 2 gamma_{n-1}.
    """
    if state.prev_residual_norm <= 0.0:
        return state.gamma, 0.0
    raw = resid_norm / state.prev_residual_norm
    if resid_norm <= state.prev_residual_norm:
        gamma = min(max(raw, 0.5 * state.gamma), 1.0)
    else:
        gamma = min(raw, 2.0 * state.gamma)
    alpha = gamma * resid_norm
    if alpha_cap is not None:
        alpha = min(alpha, alpha_cap)
    return gamma, alpha


def tr_step(A, R, F, alpha: float, factor: Factorization | None = None) -> np.ndarray:
    """Solve (alpha R + A) w = F."""
    M = A if alpha == 0.0 else (sp.csr_matrix(A) + alpha * sp.csr_matrix(R))
    if factor is None:
        factor = Factorization(M)
    return factor.solve(F)


def ntr_step(A, R, F, alpha: float) -> np.ndarray:
    """Minimize ||F - A w||^2 + alpha ||R w||^2 via the normal equations."""
    return Factorization(normal_system(A, R, alpha)).solve(normal_rhs(A, F))


def newton_step(A, F) -> np.ndarray:
    return Factorization(A).solve(F)


def check_stop(records, gamma_history, F0_norm: float, tol: float) -> Status:
    """Converged if ||F^{n+1}|| <= tol; Stalled if the residual decreased below
    both ||F^n|| and ||F^0|| while gamma_n > gamma_{n-1}.

    ``gamma_history[n]`` is the gamma used for step n.  gamma_0 is a fixed
    starting value, so the stall test needs n >= 2.
    """
    last = records[-1]
    if last.residual_norm <= tol:
        return Status.CONVERGED
    n = len(records) - 1
    if n >= 2:
        prev = records[-2].residual_norm
        if (last.residual_norm < F0_norm and last.residual_norm < prev
                and gamma_history[n] > gamma_history[n - 1]):
            return Status.STALLED
    return Status.CONTINUE


def choose_method(F0_norm: float, config: SolverConfig) -> Method:
    if config.method_override is not None:
        return config.method_override
    return Method.NTR if F0_norm >= config.switch_threshold else Method.TR


def run_iterations(mesh: Mesh, dofmap: DofMap, u0, spec: ProblemSpec, R, config: SolverConfig,
                   quad=DEFAULT_QUADRATURE) -> IterationResult:
    geo = quad if isinstance(quad, ElementData) else ElementData.build(mesh, quad)
    u = np.array(u0, dtype=float)
    F = assemble_residual(mesh, dofmap, u, spec, geo)
    F0 = float(np.linalg.norm(F))
    method = choose_method(F0, config)
    result = IterationResult(u=u, method=method, initial_residual=F0)
    if F0 <= config.tol:
        result.status = Status.CONVERGED
        return result

    resid = F0
    gamma = config.gamma0
    alpha = gamma * F0
    if config.alpha_cap is not None:
        alpha = min(alpha, config.alpha_cap)
    state = GammaState(gamma, F0)
    status = Status.CONTINUE
    for n in range(config.max_iter):
        if n >= 1:
            if config.alpha_mode == "gamma":
                gamma, alpha = update_gamma(state, resid, config.alpha_cap)
            else:
                gamma = resid / state.prev_residual_norm
                alpha = resid * gamma
                if config.alpha_cap is not None:
                    alpha = min(alpha, config.alpha_cap)
            state = GammaState(gamma, resid)

        A = assemble_jacobian(mesh, dofmap, u, spec, geo)
        Jn = None
        try:
            if method is Method.STANDARD:
                w = newton_step(A, F)
            elif method is Method.TR:
                w = tr_step(A, R, F, alpha)
            else:
                w = ntr_step(A, R, F, alpha)
            if config.compute_Jn:
                Jn, _ = regularization_factor(A, R, alpha)
        except SingularSystemError as exc:
            log.info("step %d failed: %s", n, exc)
            status = Status.STEP_FAILURE
            break

        u_norm = float(np.linalg.norm(u))
        step = float(np.linalg.norm(w))
        u = u + w
        F = assemble_residual(mesh, dofmap, u, spec, geo)
        resid = float(np.linalg.norm(F))
        if not math.isfinite(resid):
            status = Status.STEP_FAILURE
            break
        result.records.append(IterationRecord(
            iter=n + 1,
            residual_norm=resid,
            step_ratio=step / u_norm if u_norm > 0 else step,
            gamma=gamma,
            alpha=alpha,
            method=method,
            Jn=Jn,
            step_absolute=u_norm == 0,
        ))
        status = check_stop(result.records, result.gammas, F0, config.tol)
        if status is not Status.CONTINUE:
            break
    else:
        status = Status.MAX_ITER

    result.u = u
    result.status = status
    return result


ITERATION_HEADER = ["level", "iter", "residual", "E_n", "gamma", "alpha", "J_n", "method"]


def fmt(x) -> str:
    return "" if x is None else f"{x:.6g}"


def iteration_rows(level: int, result: IterationResult):
    """CSV rows for one level, led by the initial residual as iter 0."""
    yield [str(level), "0", fmt(result.initial_residual), "", "", "", "", result.method.value]
    for r in result.records:
        yield [str(level), str(r.iter), fmt(r.residual_norm), fmt(r.step_ratio), fmt(r.gamma),
               fmt(r.alpha), fmt(r.Jn), r.method.value]


def write_iterations_csv(path, levels):
    """``levels`` is an iterable of (level, IterationResult)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ITERATION_HEADER)
        for level, result in levels:
            writer.writerows(iteration_rows(level, result))
