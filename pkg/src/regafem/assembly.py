"""P1 assembly of the nonlinear residual, its Jacobian and the Laplacian penalty.

All matrices live on interior dofs only; boundary vertices carry the value 0
and are dropped from the system.  Row index = test function, column index =
trial function, so ``A @ w`` approximates the derivative of ``-F`` in the
direction ``w``.  Assembly is a vectorized element loop followed by a COO->CSR
reduction in a fixed order, so identical inputs give identical matrices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import DofMap, Mesh, barycentric_gradients
from .problems import ProblemSpec
from .quadrature import get_rule

DEFAULT_QUADRATURE = 2


@dataclass(frozen=True)
class ElementData:
    """Per-element geometry reused across assembly calls on one mesh."""

    area: np.ndarray       # (nt,)
    grads: np.ndarray      # (nt, 3, 2)
    points: np.ndarray     # (nt, nq, 2) physical quadrature points
    bary: np.ndarray       # (nq, 3)
    weights: np.ndarray    # (nq,)

    @classmethod
    def build(cls, mesh: Mesh, quad: int = DEFAULT_QUADRATURE) -> "ElementData":
        bary, weights = get_rule(quad)
        p = mesh.vertices[mesh.triangles]
        return cls(
            area=np.abs(mesh.signed_areas()),
            grads=barycentric_gradients(mesh),
            points=np.einsum("qi,tid->tqd", bary, p),
            bary=bary,
            weights=weights,
        )


def _element_data(mesh, quad):
    return quad if isinstance(quad, ElementData) else ElementData.build(mesh, quad)


def _local_fields(mesh, dofmap, u, geo):
    u = np.asarray(u, dtype=float)
    if u.shape != (dofmap.n_dof,):
        raise ValueError(f"iterate has shape {u.shape}, expected ({dofmap.n_dof},)")
    uloc = dofmap.to_vertex(u)[mesh.triangles]             # (nt, 3)
    uq = uloc @ geo.bary.T                                 # (nt, nq)
    grad_u = np.einsum("ti,tid->td", uloc, geo.grads)      # (nt, 2)
    return uq, grad_u


def _scatter_vector(mesh, dofmap, local):
    dofs = dofmap.dof_of_vertex[mesh.triangles].ravel()
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=local.ravel()[keep], minlength=dofmap.n_dof)


def _scatter_matrix(mesh, dofmap, local):
    """Sum local (nt, 3, 3) blocks, indexed [test, trial], into a CSR matrix."""
    dofs = dofmap.dof_of_vertex[mesh.triangles]
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = dofmap.n_dof
    return sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()


def assemble_residual(mesh: Mesh, dofmap: DofMap, u, spec: ProblemSpec,
                      quad=DEFAULT_QUADRATURE) -> np.ndarray:
    """F_j = -[(kappa(u_h) grad u_h, grad phi_j) - (f, phi_j)] by quadrature."""
    geo = _element_data(mesh, quad)
    uq, grad_u = _local_fields(mesh, dofmap, u, geo)
    kq = spec.kappa(uq)                                    # (nt, nq)
    fq = spec.load(geo.points[..., 0], geo.points[..., 1])
    flux_term = np.einsum("tq,q,td,tjd->tj", kq, geo.weights, grad_u, geo.grads)
    load_term = np.einsum("tq,q,qj->tj", fq, geo.weights, geo.bary)
    local = -geo.area[:, None] * (flux_term - load_term)
    return _scatter_vector(mesh, dofmap, local)


def assemble_jacobian(mesh: Mesh, dofmap: DofMap, u, spec: ProblemSpec,
                      quad=DEFAULT_QUADRATURE) -> sp.csr_matrix:
    """Entry [j, i] = (kappa'(u_h) phi_i grad u_h, grad phi_j) + (kappa(u_h) grad phi_i, grad phi_j)."""
    geo = _element_data(mesh, quad)
    uq, grad_u = _local_fields(mesh, dofmap, u, geo)
    kq = spec.kappa(uq) @ geo.weights                      # (nt,)  integral of kappa / |T|
    dkq = spec.kappa_prime(uq)                             # (nt, nq)
    gg = np.einsum("tjd,tid->tji", geo.grads, geo.grads)
    # int kappa'(u) phi_i / |T|, (nt, 3)
    dk_phi = np.einsum("tq,q,qi->ti", dkq, geo.weights, geo.bary)
    grad_u_dot = np.einsum("td,tjd->tj", grad_u, geo.grads)
    local = geo.area[:, None, None] * (
        grad_u_dot[:, :, None] * dk_phi[:, None, :] + kq[:, None, None] * gg
    )
    return _scatter_matrix(mesh, dofmap, local)


def local_stiffness(mesh: Mesh) -> np.ndarray:
    """Exact element stiffness blocks (grad phi_i, grad phi_j)_T, shape (nt, 3, 3)."""
    grads = barycentric_gradients(mesh)
    area = np.abs(mesh.signed_areas())
    return area[:, None, None] * np.einsum("tjd,tid->tji", grads, grads)


def assemble_penalty(mesh: Mesh, dofmap: DofMap) -> sp.csr_matrix:
    """Laplacian stiffness matrix R_ij = (grad phi_i, grad phi_j)."""
    return _scatter_matrix(mesh, dofmap, local_stiffness(mesh))


def apply_cutoff(R: sp.spmatrix, cut_dofs) -> sp.csr_matrix:
    """Zero the rows and columns of ``cut_dofs``; keeps R symmetric semidefinite."""
    n = R.shape[0]
    cut = np.asarray(list(cut_dofs) if not isinstance(cut_dofs, np.ndarray) else cut_dofs,
                     dtype=np.int64)
    if cut.size and (cut.min() < 0 or cut.max() >= n):
        raise ValueError("cut dof out of range")
    keep = np.ones(n)
    keep[cut] = 0.0
    D = sp.diags(keep)
    out = (D @ R @ D).tocsr()
    out.eliminate_zeros()
    return out
