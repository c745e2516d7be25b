"""Residual-based error indicators, Doerfler marking and the regularization cutoff."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import DEFAULT_QUADRATURE, ElementData
from .mesh import DofMap, Mesh
from .problems import ProblemSpec
from .quadrature import get_edge_rule


@dataclass(frozen=True)
class IndicatorField:
    eta: np.ndarray   # (nt,) nonnegative

    @property
    def total(self) -> float:
        return float(np.sqrt(np.sum(self.eta ** 2)))


def compute_indicators(mesh: Mesh, dofmap: DofMap, u, spec: ProblemSpec,
                       quad: int = DEFAULT_QUADRATURE) -> IndicatorField:
    """eta_T^2 = h_T^2 ||R_T||^2_{L2(T)} + h_T ||J||^2_{L2(dT)}.

    R_T = -kappa'(v)|grad v|^2 - f is the elementwise strong residual of a P1
    function; J is the jump of kappa(v) grad v . n across interior edges.
    """
    geo = ElementData.build(mesh, quad)
    v = dofmap.to_vertex(u)
    uloc = v[mesh.triangles]
    uq = uloc @ geo.bary.T
    grad_v = np.einsum("ti,tid->td", uloc, geo.grads)
    fq = spec.load(geo.points[..., 0], geo.points[..., 1])
    res = -spec.kappa_prime(uq) * np.sum(grad_v ** 2, axis=1)[:, None] - fq
    interior_sq = geo.area * ((res ** 2) @ geo.weights)

    h = mesh.diameters()
    edge_vertices, tri_edges = mesh.edges()
    ne = len(edge_vertices)
    count = np.bincount(tri_edges.ravel(), minlength=ne)
    flat = tri_edges.ravel()
    order = np.argsort(flat, kind="stable")
    owners = order // 3
    starts = np.searchsorted(flat[order], np.arange(ne))
    inner = np.flatnonzero(count == 2)
    t1 = owners[starts[inner]]
    t2 = owners[starts[inner] + 1]

    p0 = mesh.vertices[edge_vertices[inner, 0]]
    p1 = mesh.vertices[edge_vertices[inner, 1]]
    tangent = p1 - p0
    length = np.linalg.norm(tangent, axis=1)
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / length[:, None]
    flux_jump = np.einsum("ed,ed->e", grad_v[t1] - grad_v[t2], normal)

    s, w = get_edge_rule(quad)
    v0 = v[edge_vertices[inner, 0]]
    v1 = v[edge_vertices[inner, 1]]
    vq = v0[:, None] * (1.0 - s) + v1[:, None] * s
    kappa_sq = (spec.kappa(vq) ** 2) @ w
    edge_sq = length * kappa_sq * flux_jump ** 2          # ||J||^2 on the edge

    jump_sq = np.zeros(mesh.n_elements)
    np.add.at(jump_sq, t1, edge_sq)
    np.add.at(jump_sq, t2, edge_sq)

    eta_sq = h ** 2 * interior_sq + h * jump_sq
    return IndicatorField(np.sqrt(eta_sq))


def mark_for_refinement(ind: IndicatorField, theta: float = 0.5) -> np.ndarray:
    """Smallest set carrying ``theta`` of the total squared indicator (Doerfler)."""
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    eta_sq = np.asarray(ind.eta, dtype=float) ** 2
    if eta_sq.size == 0 or not np.any(eta_sq > 0):
        return np.zeros(0, dtype=np.int64)
    # descending eta^2, ties by ascending element id
    order = np.lexsort((np.arange(eta_sq.size), -eta_sq))
    partial = np.cumsum(eta_sq[order])
    k = int(np.searchsorted(partial, theta * partial[-1], side="left"))
    return np.sort(order[: k + 1])


def select_regularized_dofs(mesh: Mesh, dofmap: DofMap, ind: IndicatorField):
    """Split dofs into (regularized, cut).

    A dof is cut when every element touching its vertex has
    eta_T <= sqrt(median(eta_T)).
    """
    eta = np.asarray(ind.eta, dtype=float)
    threshold = np.sqrt(np.median(eta))
    large = eta > threshold
    touched = np.zeros(mesh.n_vertices, dtype=bool)
    touched[mesh.triangles[large].ravel()] = True
    regularized_vertex = touched[dofmap.vertex_of_dof]
    dofs = np.arange(dofmap.n_dof)
    return dofs[regularized_vertex], dofs[~regularized_vertex]
