"""Quadrature rules on triangles (barycentric) and edges (1D Gauss).

Weights are normalized to sum to 1; multiply by element area / edge length.
"""
import numpy as np

# 3-point edge-midpoint rule, exact for degree 2
MIDPOINT_BARY = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])
MIDPOINT_WEIGHTS = np.full(3, 1.0 / 3.0)

# 7-point rule, exact for degree 5
_a1 = 0.0597158717897698
_b1 = 0.4701420641051151
_a2 = 0.7974269853530873
_b2 = 0.1012865073234563
DEGREE5_BARY = np.array([
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [_a1, _b1, _b1],
    [_b1, _a1, _b1],
    [_b1, _b1, _a1],
    [_a2, _b2, _b2],
    [_b2, _a2, _b2],
    [_b2, _b2, _a2],
])
DEGREE5_WEIGHTS = np.array([
    0.225,
    0.1323941527885062, 0.1323941527885062, 0.1323941527885062,
    0.1259391805448271, 0.1259391805448271, 0.1259391805448271,
])

# 3-point Gauss-Legendre on [0, 1], exact for degree 5
GAUSS3_NODES = np.array([
    0.5 - 0.5 * np.sqrt(3.0 / 5.0),
    0.5,
    0.5 + 0.5 * np.sqrt(3.0 / 5.0),
])
GAUSS3_WEIGHTS = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


def triangle_rule(degree: int):
    """Return (barycentric coords, unit weights) exact to the given degree."""
    if degree <= 2:
        return MIDPOINT_BARY, MIDPOINT_WEIGHTS
    if degree <= 5:
        return DEGREE5_BARY, DEGREE5_WEIGHTS
    raise ValueError(f"no rule of degree {degree}")


def physical_points(bary: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Map (nq, 3) barycentric coords onto (..., 3, 2) vertex arrays -> (..., nq, 2)."""
    return np.einsum("qi,...id->...qd", bary, verts)
