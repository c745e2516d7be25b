import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import assert_conforming, on_square_boundary, random_refinements
from regafem.mesh import (DofMap, create_structured_unit_square, interpolate, refine,
                          refine_coarsest, uniform_refine, write_vtk)


@pytest.mark.parametrize("n, nt, nv, ndof", [(1, 2, 4, 0), (3, 18, 16, 4), (4, 32, 25, 9)])
def test_structured_counts(n, nt, nv, ndof):
    mesh = create_structured_unit_square(n)
    assert mesh.n_elements == nt == 2 * n * n
    assert mesh.n_vertices == nv
    assert DofMap.from_mesh(mesh).n_dof == ndof
    assert np.all(mesh.generation == 0)
    assert np.all(mesh.parent == -1)


def test_structured_rejects_zero():
    with pytest.raises(ValueError):
        create_structured_unit_square(0)


def test_structured_geometry():
    mesh = create_structured_unit_square(3)
    assert np.all(mesh.signed_areas() > 0)
    assert np.allclose(np.abs(mesh.signed_areas()), 1 / 18)
    np.testing.assert_array_equal(mesh.boundary, on_square_boundary(mesh.vertices))
    # initial refinement edge is the longest edge (the hypotenuse)
    p = mesh.vertices[mesh.refinement_edge]
    ref_len = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    np.testing.assert_allclose(ref_len, mesh.diameters())


def test_uniform_refinement_counts():
    base = create_structured_unit_square(3)
    assert uniform_refine(base, passes=1).n_elements == 36
    assert uniform_refine(base).n_elements == 72
    assert uniform_refine(base, passes=4).n_elements == 288


def test_diameter_ratio_per_full_pass():
    mesh = create_structured_unit_square(2)
    for _ in range(3):
        finer = uniform_refine(mesh)
        ratio = finer.diameters().max() / mesh.diameters().max()
        assert 0.49 <= ratio <= 0.71
        mesh = finer


def test_refine_empty_returns_same_mesh():
    mesh = create_structured_unit_square(2)
    assert refine(mesh, []) is mesh


def test_refine_all_of_single_square():
    mesh = create_structured_unit_square(1)
    fine = refine(mesh, [0, 1])
    assert fine.n_elements >= 4
    assert_conforming(fine)


def test_refine_rejects_bad_ids():
    mesh = create_structured_unit_square(1)
    with pytest.raises(ValueError):
        refine(mesh, [2])


def test_refine_single_element_closure():
    mesh = create_structured_unit_square(4)
    fine = refine(mesh, [5])
    assert_conforming(fine)
    # the marked element no longer exists as an unrefined child
    kids = np.flatnonzero(fine.parent == 5)
    assert len(kids) >= 2 and np.all(fine.generation[kids] >= 1)


def test_genealogy_and_area_conservation():
    mesh = create_structured_unit_square(3)
    fine = refine(mesh, [0, 7, 11])
    area_c = np.abs(mesh.signed_areas())
    area_f = np.abs(fine.signed_areas())
    for t in range(mesh.n_elements):
        kids = np.flatnonzero(fine.parent == t)
        assert np.isclose(area_f[kids].sum(), area_c[t])
        refined = len(kids) > 1
        assert np.all(fine.generation[kids] >= mesh.generation[t] + (1 if refined else 0))
        if refined:
            # children of a single bisection step are exactly one generation deeper
            assert fine.generation[kids].min() == mesh.generation[t] + 1


def test_old_vertices_stable():
    mesh = create_structured_unit_square(3)
    fine = refine(mesh, [0, 4])
    np.testing.assert_array_equal(fine.vertices[:mesh.n_vertices], mesh.vertices)
    assert fine.n_parent_vertices == mesh.n_vertices


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 10_000), frac=st.floats(0.05, 0.6))
def test_random_refinement_sequences_stay_conforming(seed, frac):
    for mesh in random_refinements(seed, steps=5, frac=frac):
        assert_conforming(mesh)
        assert np.all(mesh.signed_areas() > 0)
        np.testing.assert_array_equal(mesh.boundary, on_square_boundary(mesh.vertices))
        assert np.isclose(np.abs(mesh.signed_areas()).sum(), 1.0)


@settings(deadline=None, max_examples=20)
@given(seed=st.integers(0, 10_000))
def test_shape_regularity_bounded(seed):
    # newest-vertex bisection generates finitely many similarity classes
    meshes = random_refinements(seed, steps=6, frac=0.3)
    def min_angle(m):
        p = m.vertices[m.triangles]
        angles = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            c = np.einsum("td,td->t", a, b) / np.linalg.norm(a, axis=1) / np.linalg.norm(b, axis=1)
            angles.append(np.arccos(np.clip(c, -1, 1)))
        return np.min(angles)
    assert min(min_angle(m) for m in meshes) >= np.pi / 4 - 1e-12


def test_refine_coarsest_uniform_marks_all():
    mesh = create_structured_unit_square(2)
    fine = refine_coarsest(mesh)
    assert np.all(fine.generation >= 1)


def test_refine_coarsest_mixed_generations():
    mesh = refine(create_structured_unit_square(3), [4])
    assert set(np.unique(mesh.generation)) >= {0, 1}
    fine = refine_coarsest(mesh)
    gen0 = np.flatnonzero(mesh.generation == 0)
    for t in gen0:
        assert np.sum(fine.parent == t) >= 2
    assert fine.generation.min() > mesh.generation.min()


@settings(deadline=None, max_examples=15)
@given(seed=st.integers(0, 10_000))
def test_refine_coarsest_progress(seed):
    mesh = random_refinements(seed, steps=3)[-1]
    fine = refine_coarsest(mesh)
    assert fine.generation.min() > mesh.generation.min() or fine.n_elements > mesh.n_elements


def test_interpolate_zero_and_linear():
    rng = np.random.default_rng(0)
    meshes = random_refinements(7, steps=4)
    for coarse, fine in zip(meshes, meshes[1:]):
        assert np.all(interpolate(coarse, np.zeros(coarse.n_vertices), fine) == 0)
        a, b, c = rng.standard_normal(3)
        lin = lambda v: a + b * v[:, 0] + c * v[:, 1]  # noqa: E731
        out = interpolate(coarse, lin(coarse.vertices), fine)
        inner = ~fine.boundary
        np.testing.assert_allclose(out[inner], lin(fine.vertices)[inner], atol=1e-13)
        assert np.all(out[fine.boundary] == 0)


def test_interpolate_midpoint_mean():
    coarse = create_structured_unit_square(2)
    fine = refine(coarse, [0, 3])
    field = np.random.default_rng(3).standard_normal(coarse.n_vertices)
    field[coarse.boundary] = 0.0
    out = interpolate(coarse, field, fine)
    np.testing.assert_array_equal(out[:coarse.n_vertices], field)
    assert fine.n_vertices > coarse.n_vertices
    for v in range(coarse.n_vertices, fine.n_vertices):
        e0, e1 = fine.edge_parents[v]
        expected = 0.0 if fine.boundary[v] else 0.5 * (field[e0] + field[e1])
        assert out[v] == pytest.approx(expected)


def test_interpolate_rejects_unrelated_mesh():
    a = create_structured_unit_square(2)
    b = refine(create_structured_unit_square(3), [0])
    with pytest.raises(ValueError):
        interpolate(a, np.zeros(a.n_vertices), b)


def test_dofmap_roundtrip():
    mesh = create_structured_unit_square(4)
    dm = DofMap.from_mesh(mesh)
    u = np.arange(dm.n_dof, dtype=float) + 1
    full = dm.to_vertex(u)
    assert np.all(full[mesh.boundary] == 0)
    np.testing.assert_array_equal(dm.restrict(full), u)
    np.testing.assert_array_equal(np.sort(dm.dof_of_vertex[~mesh.boundary]), np.arange(dm.n_dof))
    with pytest.raises(ValueError):
        dm.to_vertex(np.zeros(dm.n_dof + 1))


def test_write_vtk(tmp_path):
    mesh = create_structured_unit_square(2)
    path = tmp_path / "m.vtk"
    write_vtk(path, mesh, point_data={"u": np.zeros(mesh.n_vertices)},
              cell_data={"eta": np.ones(mesh.n_elements)})
    text = path.read_text().splitlines()
    assert text[0].startswith("# vtk DataFile")
    assert f"POINTS {mesh.n_vertices} double" in text
    assert f"CELLS {mesh.n_elements} {4 * mesh.n_elements}" in text
    assert text.count("5") >= mesh.n_elements
    assert "SCALARS u double 1" in text and "SCALARS eta double 1" in text
    with pytest.raises(ValueError):
        write_vtk(path, mesh, point_data={"u": np.zeros(3)})
