"""Triangle and edge quadrature rules in barycentric form."""
import numpy as np

# Dunavant degree-5 rule
_a1, _b1, _w1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_a2, _b2, _w2 = 0.797426985353087, 0.101286507323456, 0.125939180544827

_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]), np.full(3, 1 / 3)),
    5: (
        np.array([
            [1 / 3, 1 / 3, 1 / 3],
            [_a1, _b1, _b1], [_b1, _a1, _b1], [_b1, _b1, _a1],
            [_a2, _b2, _b2], [_b2, _a2, _b2], [_b2, _b2, _a2],
        ]),
        np.array([0.225, _w1, _w1, _w1, _w2, _w2, _w2]),
    ),
}

# Gauss-Legendre on [0, 1], matched to the triangle rule's degree
_EDGE_RULES = {1: 1, 2: 2, 5: 3}


def get_rule(degree: int):
    """Return ``(barycentric_points, weights)``; weights sum to one.

    Available degrees: 1 (barycenter), 2 (edge midpoints), 5 (7 points).
    """
    try:
        bary, w = _RULES[degree]
    except KeyError:
        raise ValueError(f"no triangle rule of degree {degree}; choose from {sorted(_RULES)}")
    return bary.copy(), w.copy()


def get_edge_rule(degree: int):
    """Points in [0, 1] and weights (summing to one) for edge integrals."""
    if degree not in _EDGE_RULES:
        raise ValueError(f"no edge rule paired with degree {degree}")
    x, w = np.polynomial.legendre.leggauss(_EDGE_RULES[degree])
    return 0.5 * (x + 1.0), 0.5 * w
