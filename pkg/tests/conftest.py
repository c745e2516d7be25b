import numpy as np
import pytest

from regafem.mesh import Mesh, create_structured_unit_square, refine


def edge_census(mesh: Mesh):
    """Map sorted edge -> number of triangles using it."""
    counts = {}
    for tri in mesh.triangles:
        for i in range(3):
            e = tuple(sorted((int(tri[i]), int(tri[(i + 1) % 3]))))
            counts[e] = counts.get(e, 0) + 1
    return counts


def assert_conforming(mesh: Mesh):
    """Every edge is shared by at most two triangles, and no vertex sits inside an edge."""
    counts = edge_census(mesh)
    assert max(counts.values()) <= 2
    v = mesh.vertices
    for (a, b), c in counts.items():
        if c == 2:
            continue
        # boundary edge must lie on the square boundary
        pa, pb = v[a], v[b]
        on_side = any(
            (abs(pa[k] - s) < 1e-14 and abs(pb[k] - s) < 1e-14) for k in (0, 1) for s in (0.0, 1.0)
        )
        assert on_side, f"edge {(a, b)} is used once but is interior (hanging vertex)"


def on_square_boundary(points):
    x, y = points[:, 0], points[:, 1]
    tol = 1e-14
    return (np.abs(x) < tol) | (np.abs(x - 1) < tol) | (np.abs(y) < tol) | (np.abs(y - 1) < tol)


def random_refinements(seed: int, n0: int = 2, steps: int = 6, frac: float = 0.2):
    rng = np.random.default_rng(seed)
    meshes = [create_structured_unit_square(n0)]
    for _ in range(steps):
        m = meshes[-1]
        k = max(1, int(frac * m.n_elements))
        meshes.append(refine(m, rng.choice(m.n_elements, size=k, replace=False)))
    return meshes


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_RESULTS[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
