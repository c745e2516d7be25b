"""Conforming triangulations of the unit square with newest-vertex bisection.

Triangles are stored in "newest vertex first" order: local vertex 0 is the
newest vertex and the refinement edge is the edge opposite it, i.e. the edge
joining local vertices 1 and 2.  Vertex indices are stable under refinement;
new vertices are appended after the old ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray          # (nv, 2) float
    triangles: np.ndarray         # (nt, 3) int, counterclockwise, newest vertex first
    boundary: np.ndarray          # (nv,) bool
    generation: np.ndarray        # (nt,) int, number of bisections since the initial mesh
    parent: np.ndarray            # (nt,) int, ancestor id in the previous mesh or -1
    # For vertices created by the last refinement: endpoints of the bisected edge.
    # Retained vertices carry (-1, -1).
    edge_parents: np.ndarray = field(default=None)
    n_parent_vertices: int = -1

    def __post_init__(self):
        if self.edge_parents is None:
            object.__setattr__(
                self, "edge_parents", np.full((len(self.vertices), 2), -1, dtype=np.int64)
            )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def refinement_edge(self) -> np.ndarray:
        """Vertex pairs of each triangle's refinement edge, shape (nt, 2)."""
        return self.triangles[:, 1:3]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lengths = np.stack(
            [np.linalg.norm(p[:, (i + 1) % 3] - p[:, (i + 2) % 3], axis=1) for i in range(3)],
            axis=1,
        )
        return lengths.max(axis=1)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique edges and the triangle->edge incidence.

        Returns ``(edge_vertices, tri_edges)`` where ``edge_vertices`` has shape
        (ne, 2) with sorted endpoints and ``tri_edges[t, i]`` is the edge opposite
        local vertex ``i`` of triangle ``t``.
        """
        t = self.triangles
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        local = np.sort(local, axis=1)
        edge_vertices, inverse = np.unique(local, axis=0, return_inverse=True)
        return edge_vertices, inverse.reshape(-1, 3)


@dataclass(frozen=True)
class DofMap:
    """Interior-vertex numbering for homogeneous Dirichlet P1 elements."""

    dof_of_vertex: np.ndarray     # (nv,) int, -1 on boundary vertices
    vertex_of_dof: np.ndarray     # (n_dof,) int

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        interior = np.flatnonzero(~mesh.boundary)
        dof_of_vertex = np.full(mesh.n_vertices, -1, dtype=np.int64)
        dof_of_vertex[interior] = np.arange(len(interior))
        return cls(dof_of_vertex, interior)

    @property
    def n_dof(self) -> int:
        return len(self.vertex_of_dof)

    def to_vertex(self, u: np.ndarray) -> np.ndarray:
        """Extend a dof vector by zero to all vertices."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_dof,):
            raise ValueError(f"expected {self.n_dof} dof values, got shape {u.shape}")
        full = np.zeros(len(self.dof_of_vertex))
        full[self.vertex_of_dof] = u
        return full

    def restrict(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float)[self.vertex_of_dof]


def barycentric_gradients(mesh: Mesh) -> np.ndarray:
    """Constant gradients of the three P1 hat functions on each triangle, (nt, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    area2 = 2.0 * mesh.signed_areas()
    # grad lambda_i = rot90(p_{i+2} - p_{i+1}) / (2|T|)
    grads = np.empty((mesh.n_elements, 3, 2))
    for i in range(3):
        e = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        grads[:, i, 0] = -e[:, 1] / area2
        grads[:, i, 1] = e[:, 0] / area2
    return grads


def create_structured_unit_square(n: int) -> Mesh:
    """Uniform mesh of [0,1]^2: an n x n grid of squares, each cut into two right triangles."""
    if n < 1:
        raise ValueError(f"subdivision count must be >= 1, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            # right-angle vertex first so the hypotenuse (longest edge) is the refinement edge
            tris.append((v10, v11, v00))
            tris.append((v01, v00, v11))
    triangles = np.array(tris, dtype=np.int64)

    on_bdry = (
        np.isclose(vertices[:, 0], 0.0) | np.isclose(vertices[:, 0], 1.0)
        | np.isclose(vertices[:, 1], 0.0) | np.isclose(vertices[:, 1], 1.0)
    )
    nt = len(triangles)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary=on_bdry,
        generation=np.zeros(nt, dtype=np.int64),
        parent=np.full(nt, -1, dtype=np.int64),
    )


def refine(mesh: Mesh, marked) -> Mesh:
    """Newest-vertex bisection of the marked elements plus conformity closure.

    Every marked element is bisected at least once.  Neighbours are bisected as
    often as needed (at most twice) to remove hanging vertices.
    """
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked,
                                  dtype=np.int64))
    if marked.size == 0:
        return mesh
    nt = mesh.n_elements
    if marked.min() < 0 or marked.max() >= nt:
        raise ValueError("marked element id out of range")

    edge_vertices, tri_edges = mesh.edges()
    ne = len(edge_vertices)
    edge_count = np.bincount(tri_edges.ravel(), minlength=ne)

    # edge -> incident triangles, at most two per edge on a conforming mesh
    edge_tris = np.full((ne, 2), -1, dtype=np.int64)
    flat = tri_edges.ravel()
    order = np.argsort(flat, kind="stable")
    starts = np.searchsorted(flat[order], np.arange(ne))
    owners = order // 3
    for slot in range(2):
        idx = starts + slot
        ok = (idx < len(flat)) & (slot < edge_count)
        edge_tris[ok, slot] = owners[idx[ok]]

    ref_edge = tri_edges[:, 0]
    edge_marked = np.zeros(ne, dtype=bool)
    stack = list(np.unique(ref_edge[marked]))
    edge_marked[stack] = True
    # closure: any triangle with a marked edge must have its refinement edge marked
    while stack:
        e = stack.pop()
        for t in edge_tris[e]:
            if t < 0:
                continue
            r = ref_edge[t]
            if not edge_marked[r]:
                edge_marked[r] = True
                stack.append(r)

    split = np.flatnonzero(edge_marked)
    nv = mesh.n_vertices
    ends = edge_vertices[split]
    new_coords = 0.5 * (mesh.vertices[ends[:, 0]] + mesh.vertices[ends[:, 1]])
    vertices = np.vstack([mesh.vertices, new_coords])
    boundary = np.concatenate([mesh.boundary, edge_count[split] == 1])
    edge_parents = np.vstack([np.full((nv, 2), -1, dtype=np.int64), ends])

    edge_index = {(int(a), int(b)): i for i, (a, b) in enumerate(edge_vertices[split])}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        i = edge_index.get(key)
        return -1 if i is None else nv + i

    new_tris = []
    new_gen = []
    new_parent = []
    tris = mesh.triangles.tolist()
    gens = mesh.generation.tolist()
    for t in range(nt):
        a, b, c = tris[t]
        if not edge_marked[ref_edge[t]]:
            new_tris.append((a, b, c))
            new_gen.append(gens[t])
            new_parent.append(t)
            continue
        m = nv + edge_index[(b, c) if b < c else (c, b)]
        g = gens[t] + 1
        for child in ((m, a, b), (m, c, a)):
            cm, ca, cb = child
            mm = midpoint(ca, cb)
            if mm < 0:
                pieces = [child]
            else:
                pieces = [(mm, cm, ca), (mm, cb, cm)]
            new_tris.extend(pieces)
            new_gen.extend([g + (mm >= 0)] * len(pieces))
            new_parent.extend([t] * len(pieces))

    return Mesh(
        vertices=vertices,
        triangles=np.array(new_tris, dtype=np.int64),
        boundary=boundary,
        generation=np.array(new_gen, dtype=np.int64),
        parent=np.array(new_parent, dtype=np.int64),
        edge_parents=edge_parents,
        n_parent_vertices=nv,
    )


def uniform_refine(mesh: Mesh, passes: int = 2) -> Mesh:
    """Bisect every element ``passes`` times (two passes = quadrisection)."""
    for _ in range(passes):
        mesh = refine(mesh, np.arange(mesh.n_elements))
    return mesh


def refine_coarsest(mesh: Mesh) -> Mesh:
    """Refine all elements of minimum generation."""
    gmin = mesh.generation.min()
    return refine(mesh, np.flatnonzero(mesh.generation == gmin))


def interpolate(coarse: Mesh, field: np.ndarray, fine: Mesh) -> np.ndarray:
    """Transfer a vertex field from ``coarse`` to its refinement ``fine``.

    Retained vertices keep their values; each new vertex takes the mean of the
    endpoints of the edge it bisects, which is exact for P1 functions.
    """
    field = np.asarray(field, dtype=float)
    if field.shape != (coarse.n_vertices,):
        raise ValueError(f"field has shape {field.shape}, expected ({coarse.n_vertices},)")
    if fine is coarse:
        return field.copy()
    nv = coarse.n_vertices
    if fine.n_parent_vertices != nv or not np.array_equal(fine.vertices[:nv], coarse.vertices):
        raise ValueError("fine mesh is not a refinement of the coarse mesh")
    out = np.empty(fine.n_vertices)
    out[:nv] = field
    ends = fine.edge_parents[nv:]
    out[nv:] = 0.5 * (field[ends[:, 0]] + field[ends[:, 1]])
    out[fine.boundary] = 0.0
    return out


def write_vtk(path, mesh: Mesh, point_data: dict | None = None, cell_data: dict | None = None):
    """Write a legacy ASCII VTK unstructured grid."""
    nv, nt = mesh.n_vertices, mesh.n_elements
    lines = [
        "# vtk DataFile Version 3.0",
        "regafem mesh",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    lines += [f"{x:.16g} {y:.16g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    for header, count, data in (("POINT_DATA", nv, point_data), ("CELL_DATA", nt, cell_data)):
        if not data:
            continue
        lines.append(f"{header} {count}")
        for name, values in data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (count,):
                raise ValueError(f"{name}: expected {count} values, got {values.shape}")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [f"{v:.16g}" for v in values]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
