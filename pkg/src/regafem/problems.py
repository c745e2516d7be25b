"""Quasilinear model problem -div(kappa(u) grad u) = f on the unit square."""
from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional

import numpy as np

from .mesh import Mesh, barycentric_gradients
from .quadrature import get_rule


@dataclass(frozen=True)
class ProblemSpec:
    kappa: Callable
    kappa_prime: Callable
    load: Callable
    exact_u: Optional[Callable] = None
    exact_grad_u: Optional[Callable] = None
    epsilon: float = 1e-3
    a: float = 0.5


def model_kappa(s, epsilon=1e-3, a=0.5):
    """kappa(s) = 1 + 1/(epsilon + (s - a)^2)."""
    d = np.asarray(s, dtype=float) - a
    return 1.0 + 1.0 / (epsilon + d * d)


def model_kappa_prime(s, epsilon=1e-3, a=0.5):
    d = np.asarray(s, dtype=float) - a
    return -2.0 * d / (epsilon + d * d) ** 2


def exact_u(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def exact_grad_u(x, y):
    return np.pi * np.stack(
        [np.cos(np.pi * x) * np.sin(np.pi * y), np.sin(np.pi * x) * np.cos(np.pi * y)], axis=-1
    )


def manufactured_f(x, y, epsilon=1e-3, a=0.5):
    """Load for which u = sin(pi x) sin(pi y) solves the model problem.

    Expands -div(kappa(u) grad u) = -kappa'(u)|grad u|^2 - kappa(u) lap u, with
    lap u = -2 pi^2 u.
    """
    u = exact_u(x, y)
    g = exact_grad_u(x, y)
    grad_sq = np.sum(g * g, axis=-1)
    return (-model_kappa_prime(u, epsilon, a) * grad_sq
            + 2.0 * np.pi ** 2 * model_kappa(u, epsilon, a) * u)


def model_problem(epsilon: float = 1e-3, a: float = 0.5) -> ProblemSpec:
    return ProblemSpec(
        kappa=partial(model_kappa, epsilon=epsilon, a=a),
        kappa_prime=partial(model_kappa_prime, epsilon=epsilon, a=a),
        load=partial(manufactured_f, epsilon=epsilon, a=a),
        exact_u=exact_u,
        exact_grad_u=exact_grad_u,
        epsilon=epsilon,
        a=a,
    )


def constant_kappa_problem(c: float = 1.0, load=None, exact=None, exact_grad=None) -> ProblemSpec:
    """Linear problem -c lap u = f; ``load`` defaults to zero."""
    if load is None:
        load = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    return ProblemSpec(
        kappa=lambda s: np.full_like(np.asarray(s, dtype=float), c),
        kappa_prime=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        load=load,
        exact_u=exact,
        exact_grad_u=exact_grad,
    )


def h1_error(mesh: Mesh, u_h: np.ndarray, spec: ProblemSpec, degree: int = 5) -> float:
    """Full H^1 norm of u_h - u, with u_h given at the mesh vertices."""
    if spec.exact_u is None or spec.exact_grad_u is None:
        raise NotImplementedError("h1_error needs exact_u and exact_grad_u")
    u_h = np.asarray(u_h, dtype=float)
    if u_h.shape != (mesh.n_vertices,):
        raise ValueError(f"u_h has shape {u_h.shape}, expected ({mesh.n_vertices},)")
    bary, weights = get_rule(degree)
    p = mesh.vertices[mesh.triangles]                      # (nt, 3, 2)
    area = np.abs(mesh.signed_areas())
    grads = barycentric_gradients(mesh)                    # (nt, 3, 2)
    uloc = u_h[mesh.triangles]                             # (nt, 3)
    grad_uh = np.einsum("ti,tid->td", uloc, grads)
    xq = np.einsum("qi,tid->tqd", bary, p)                 # (nt, nq, 2)
    uhq = uloc @ bary.T                                    # (nt, nq)
    uq = spec.exact_u(xq[..., 0], xq[..., 1])
    gq = spec.exact_grad_u(xq[..., 0], xq[..., 1])         # (nt, nq, 2)
    integrand = np.sum((grad_uh[:, None, :] - gq) ** 2, axis=-1) + (uhq - uq) ** 2
    return float(np.sqrt(np.sum(area * (integrand @ weights))))
