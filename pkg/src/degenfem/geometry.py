"""Exact per-triangle metric kernel: angles, circumradius, area, altitude frame.

Angles are computed via atan2 of cross/dot products rather than arccos;
band elements have maximum angles within 1e-8 of pi at unit scale and
arccos loses precision there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTriangle, ZeroVector

# collinearity threshold relative to (longest edge)^2; generated meshes stay
# orders of magnitude above this
COLLINEAR_REL_TOL = 1e-14


@dataclass(frozen=True)
class TriangleGeom:
    """Metric data of one triangle.

    ``max_angle_vertex_index`` indexes into ``vertices``; the maximum angle
    sits opposite the longest edge (``diameter``).
    """

    vertices: np.ndarray          # (3, 2)
    area: float                   # unsigned
    diameter: float               # longest edge
    max_angle: float              # radians
    max_angle_vertex_index: int
    circumradius: float

    @property
    def apex(self) -> np.ndarray:
        """The maximum-angle vertex."""
        return self.vertices[self.max_angle_vertex_index]

    @property
    def base_vertices(self) -> tuple[np.ndarray, np.ndarray]:
        """The two vertices of the longest edge, in cyclic order after the apex."""
        i = self.max_angle_vertex_index
        return self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3]

    @property
    def sin_max_angle(self) -> float:
        """sin of the maximum angle, computed stably from cross/norms."""
        a = self.apex
        b, c = self.base_vertices
        return sin_angle_at(a, b, c)


def sin_angle_at(p: np.ndarray, q: np.ndarray, r: np.ndarray) -> float:
    """Sine of the angle at p in triangle (p, q, r); stable near 0 and pi."""
    ux, uy = q[0] - p[0], q[1] - p[1]
    vx, vy = r[0] - p[0], r[1] - p[1]
    nu = math.hypot(ux, uy)
    nv = math.hypot(vx, vy)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("angle at coincident points")
    return abs(ux * vy - uy * vx) / (nu * nv)


def tri_metrics(p0, p1, p2) -> TriangleGeom:
    """Compute the TriangleGeom of the triangle (p0, p1, p2).

    Orientation independent. Raises DegenerateTriangle when the points are
    collinear within COLLINEAR_REL_TOL * diameter^2.
    """
    verts = np.array([p0, p1, p2], dtype=float)
    edges = verts[[2, 0, 1]] - verts[[1, 2, 0]]  # edge opposite vertex i
    lens = np.hypot(edges[:, 0], edges[:, 1])
    longest = float(lens.max())
    d01 = verts[1] - verts[0]
    d02 = verts[2] - verts[0]
    signed = 0.5 * (d01[0] * d02[1] - d01[1] * d02[0])
    if abs(signed) <= COLLINEAR_REL_TOL * longest * longest:
        raise DegenerateTriangle(f"collinear points, area {signed:.3e}")

    angles = np.empty(3)
    for i in range(3):
        u = verts[(i + 1) % 3] - verts[i]
        v = verts[(i + 2) % 3] - verts[i]
        cross = u[0] * v[1] - u[1] * v[0]
        dot = u[0] * v[0] + u[1] * v[1]
        angles[i] = math.atan2(abs(cross), dot)
    idx = int(np.argmax(angles))
    max_angle = float(angles[idx])
    diameter = float(lens[idx])
    sin_max = sin_angle_at(verts[idx], verts[(idx + 1) % 3], verts[(idx + 2) % 3])
    return TriangleGeom(
        vertices=verts,
        area=abs(signed),
        diameter=diameter,
        max_angle=max_angle,
        max_angle_vertex_index=idx,
        circumradius=diameter / (2.0 * sin_max),
    )


def altitude_frame(g: TriangleGeom):
    """Altitude frame of the maximum-angle vertex.

    Returns (x_K, v1, v2): x_K is the orthogonal projection of the apex onto
    the line of the longest edge, v1 the unit vector along that edge (from B
    toward C), v2 the unit normal pointing from x_K toward the apex.
    """
    a = g.apex
    b, c = g.base_vertices
    bc = c - b
    v1 = bc / np.hypot(bc[0], bc[1])
    x_k = b + np.dot(a - b, v1) * v1
    v2 = np.array([-v1[1], v1[0]])
    if np.dot(a - x_k, v2) < 0.0:
        v2 = -v2
    return x_k, v1, v2


def angle_between(a, b) -> float:
    """Angle in [0, pi] between two nonzero vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = math.hypot(a[0], a[1])
    nb = math.hypot(b[0], b[1])
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("angle_between needs nonzero vectors")
    cross = a[0] * b[1] - a[1] * b[0]
    dot = a[0] * b[0] + a[1] * b[1]
    return math.atan2(abs(cross), dot)


def circumradius_from_center(p0, p1, p2) -> float:
    """Circumradius via the circumcenter; independent of the law-of-sines route."""
    p0 = np.asarray(p0, dtype=float)
    a = np.asarray(p1, dtype=float) - p0
    b = np.asarray(p2, dtype=float) - p0
    d = 2.0 * (a[0] * b[1] - a[1] * b[0])
    if d == 0.0:
        raise DegenerateTriangle("collinear points")
    aa = a[0] ** 2 + a[1] ** 2
    bb = b[0] ** 2 + b[1] ** 2
    ux = (b[1] * aa - a[1] * bb) / d
    uy = (a[0] * bb - b[0] * aa) / d
    return math.hypot(ux, uy)
