"""Conforming triangulation container: adjacency, boundary, classification, I/O.

The meshes handled here always tile an axis-aligned rectangle; the area
check below is part of conformity validation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DegenerateTriangle,
    DuplicateVertex,
    InvertedElement,
    NonConforming,
)
from .geometry import COLLINEAR_REL_TOL, TriangleGeom

DUPLICATE_REL_TOL = 1e-13
AREA_REL_TOL = 1e-10
# hanging node = vertex on the interior of an edge, detected at this distance
# relative to the edge length; generated meshes keep vertices >= hbar away
HANGING_REL_TOL = 1e-9


class Triangulation:
    """Immutable conforming triangulation of an axis-aligned rectangle.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, CCW
    areas, diameters, max_angles, max_angle_vertex, circumradii : per-element
    edges : (ne, 2) sorted vertex pairs
    edge_tris : (ne, 2) incident triangles, second entry -1 on the boundary
    boundary_vertex_flags : (nv,) bool
    mesh_size_h : max element diameter
    """

    def __init__(self, vertices, triangles, areas, diameters, max_angles,
                 max_angle_vertex, circumradii, edges, edge_tris,
                 boundary_vertex_flags, bbox):
        self.vertices = vertices
        self.triangles = triangles
        self.areas = areas
        self.diameters = diameters
        self.max_angles = max_angles
        self.max_angle_vertex = max_angle_vertex
        self.circumradii = circumradii
        self.edges = edges
        self.edge_tris = edge_tris
        self.boundary_vertex_flags = boundary_vertex_flags
        self.bbox = bbox
        self.mesh_size_h = float(diameters.max())
        self._edge_keys = edges[:, 0].astype(np.int64) * len(vertices) + edges[:, 1]
        for arr in (vertices, triangles, areas, diameters, max_angles,
                    max_angle_vertex, circumradii, edges, edge_tris,
                    boundary_vertex_flags):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edge_id(self, i: int, j: int) -> int:
        """Index into edges/edge_tris for vertex pair (i, j); -1 if absent."""
        a, b = (i, j) if i < j else (j, i)
        key = a * self.n_vertices + b
        pos = np.searchsorted(self._edge_keys, key)
        if pos < len(self._edge_keys) and self._edge_keys[pos] == key:
            return int(pos)
        return -1

    def edge_triangles(self, i: int, j: int) -> tuple[int, int]:
        eid = self.edge_id(i, j)
        if eid < 0:
            raise KeyError(f"no edge ({i}, {j})")
        return int(self.edge_tris[eid, 0]), int(self.edge_tris[eid, 1])

    def element_geom(self, k: int) -> TriangleGeom:
        return TriangleGeom(
            vertices=self.vertices[self.triangles[k]].copy(),
            area=float(self.areas[k]),
            diameter=float(self.diameters[k]),
            max_angle=float(self.max_angles[k]),
            max_angle_vertex_index=int(self.max_angle_vertex[k]),
            circumradius=float(self.circumradii[k]),
        )

    def sin_max_angles(self, ids=None) -> np.ndarray:
        """Stable sin(max angle) per element (equals sin(pi - max angle))."""
        ids = np.arange(self.n_triangles) if ids is None else np.asarray(ids)
        tri = self.triangles[ids]
        idx = self.max_angle_vertex[ids]
        rows = np.arange(len(ids))
        order = np.stack([idx, (idx + 1) % 3, (idx + 2) % 3], axis=1)
        p = self.vertices[tri[rows[:, None], order]]
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        return cross / (np.hypot(u[:, 0], u[:, 1]) * np.hypot(v[:, 0], v[:, 1]))


@dataclass(frozen=True)
class MeshClassification:
    """Partition of element ids by the maximum-angle threshold alpha0."""

    alpha0: float
    t1: np.ndarray  # max angle <= alpha0
    t2: np.ndarray  # max angle > alpha0


def build(vertices, triangles) -> Triangulation:
    """Validate and index a triangulation.

    Raises NonConforming, InvertedElement, DegenerateTriangle or
    DuplicateVertex on invalid input.
    """
    xy = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
    tris = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise ValueError("vertices must be (nv, 2)")
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise ValueError("triangles must be (nt, 3)")
    nv = len(xy)
    if tris.min(initial=0) < 0 or tris.max(initial=-1) >= nv:
        raise NonConforming("triangle vertex index out of range")
    if (np.diff(np.sort(tris, axis=1), axis=1) == 0).any():
        raise DegenerateTriangle("triangle with repeated vertex index")
    if not np.isfinite(xy).all():
        raise ValueError("non-finite vertex coordinates")

    _check_duplicates(xy)

    signed, diameters, max_angles, max_idx, circumradii = kernels.triangle_metrics(xy, tris)
    if (np.abs(signed) <= COLLINEAR_REL_TOL * diameters**2).any():
        k = int(np.argmin(np.abs(signed) / diameters**2))
        raise DegenerateTriangle(f"element {k} is collinear within tolerance")
    if (signed <= 0).any():
        k = int(np.argmax(signed <= 0))
        raise InvertedElement(f"element {k} has non-positive signed area")
    areas = signed.copy()

    edges, edge_tris = _build_adjacency(xy, tris)

    boundary = edge_tris[:, 1] < 0
    boundary_vertex_flags = np.zeros(nv, dtype=bool)
    boundary_vertex_flags[edges[boundary].ravel()] = True

    bbox = (float(xy[:, 0].min()), float(xy[:, 0].max()),
            float(xy[:, 1].min()), float(xy[:, 1].max()))
    rect_area = (bbox[1] - bbox[0]) * (bbox[3] - bbox[2])
    if abs(float(areas.sum()) - rect_area) > AREA_REL_TOL * rect_area:
        raise NonConforming(
            f"element areas sum to {areas.sum():.15g}, bounding rectangle has "
            f"area {rect_area:.15g}: elements overlap or leave gaps"
        )

    _check_hanging_nodes(xy, edges[boundary])

    return Triangulation(xy, tris, areas, diameters, max_angles, max_idx,
                         circumradii, edges, edge_tris, boundary_vertex_flags, bbox)


def _check_duplicates(xy: np.ndarray) -> None:
    # shifted-grid cell hash: cells of size 2*tol with half-cell offsets cover
    # every pair closer than tol in at least one pass
    span = math.hypot(xy[:, 0].max() - xy[:, 0].min(), xy[:, 1].max() - xy[:, 1].min())
    tol = DUPLICATE_REL_TOL * max(span, 1e-300)
    cell = 2.0 * tol
    for ox in (0.0, 0.5):
        for oy in (0.0, 0.5):
            keys = np.stack([
                np.floor(xy[:, 0] / cell + ox).astype(np.int64),
                np.floor(xy[:, 1] / cell + oy).astype(np.int64),
            ], axis=1)
            _, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                           return_counts=True)
            for c in np.flatnonzero(counts > 1):
                ids = np.flatnonzero(inverse == c)
                p = xy[ids]
                d = np.abs(p[:, None, :] - p[None, :, :]).max(axis=2)
                d[np.diag_indices(len(ids))] = np.inf
                if (d <= tol).any():
                    i, j = np.argwhere(d <= tol)[0]
                    raise DuplicateVertex(
                        f"vertices {ids[i]} and {ids[j]} coincide within {tol:.3e}"
                    )


def _build_adjacency(xy: np.ndarray, tris: np.ndarray):
    nv = len(xy)
    nt = len(tris)
    # directed edges i->j per triangle side
    heads = tris
    tails = tris[:, [1, 2, 0]]
    d_keys = heads.astype(np.int64).ravel() * nv + tails.astype(np.int64).ravel()
    if len(np.unique(d_keys)) != 3 * nt:
        raise NonConforming("two elements traverse the same directed edge (overlap)")
    lo = np.minimum(heads, tails).astype(np.int64).ravel()
    hi = np.maximum(heads, tails).astype(np.int64).ravel()
    u_keys = lo * nv + hi
    owner = np.repeat(np.arange(nt, dtype=np.int64), 3)
    order = np.argsort(u_keys, kind="stable")
    sk = u_keys[order]
    so = owner[order]
    uniq, start, counts = np.unique(sk, return_index=True, return_counts=True)
    if (counts > 2).any():
        raise NonConforming("an edge is shared by more than two elements")
    edges = np.stack([uniq // nv, uniq % nv], axis=1)
    edge_tris = np.full((len(uniq), 2), -1, dtype=np.int64)
    edge_tris[:, 0] = so[start]
    second = counts == 2
    edge_tris[second, 1] = so[start[second] + 1]
    return edges, edge_tris


def _check_hanging_nodes(xy: np.ndarray, boundary_edges: np.ndarray) -> None:
    # a vertex lying strictly inside a one-sided edge is a hanging node;
    # scan in chunks to bound memory
    if len(boundary_edges) == 0:
        return
    n = len(xy)
    chunk = max(1, int(2e6 // max(n, 1)))
    for s in range(0, len(boundary_edges), chunk):
        eb = boundary_edges[s:s + chunk]
        a = xy[eb[:, 0]]
        b = xy[eb[:, 1]]
        ab = b - a
        ln2 = np.sum(ab**2, axis=1)
        dx = xy[None, :, 0] - a[:, None, 0]
        dy = xy[None, :, 1] - a[:, None, 1]
        t = (dx * ab[:, None, 0] + dy * ab[:, None, 1]) / ln2[:, None]
        cross = np.abs(dx * ab[:, None, 1] - dy * ab[:, None, 0]) / np.sqrt(ln2)[:, None]
        inside = (t > 1e-9) & (t < 1.0 - 1e-9)
        on_line = cross <= HANGING_REL_TOL * np.sqrt(ln2)[:, None]
        hit = inside & on_line
        if hit.any():
            e, v = np.argwhere(hit)[0]
            raise NonConforming(
                f"vertex {v} hangs on edge ({eb[e, 0]}, {eb[e, 1]})"
            )


def classify(tri: Triangulation, alpha0: float) -> MeshClassification:
    """Split elements by max angle: t1 satisfies the threshold, t2 violates it."""
    if not (math.pi / 3 < alpha0 < math.pi):
        raise ValueError("alpha0 must lie in (pi/3, pi)")
    above = tri.max_angles > alpha0
    ids = np.arange(tri.n_triangles)
    return MeshClassification(alpha0=alpha0, t1=ids[~above], t2=ids[above])


def element_subset_boundary_loops(tri: Triangulation, elements) -> int:
    """Number of closed boundary loops of the sub-complex spanned by elements.

    1 means simply connected (for an edge-connected set).
    """
    elements = np.asarray(elements, dtype=np.int64)
    inset = np.zeros(tri.n_triangles, dtype=bool)
    inset[elements] = True
    t0 = tri.edge_tris[:, 0]
    t1 = tri.edge_tris[:, 1]
    c0 = inset[t0]
    c1 = np.where(t1 >= 0, inset[np.maximum(t1, 0)], False)
    on_boundary = c0 != c1
    bedges = tri.edges[on_boundary]
    nxt: dict[int, list[int]] = {}
    for i, j in bedges:
        nxt.setdefault(int(i), []).append(int(j))
        nxt.setdefault(int(j), []).append(int(i))
    visited: set[tuple[int, int]] = set()
    loops = 0
    for i, j in bedges:
        i, j = int(i), int(j)
        if (i, j) in visited or (j, i) in visited:
            continue
        loops += 1
        prev, cur = i, j
        visited.add((i, j))
        while cur != i:
            cands = [k for k in nxt[cur] if k != prev]
            if not cands:
                break
            prev, cur = cur, cands[0]
            visited.add((prev, cur))
    return loops


def element_subset_connected(tri: Triangulation, elements) -> bool:
    """True when the element set is connected through shared edges."""
    elements = np.asarray(elements, dtype=np.int64)
    if len(elements) == 0:
        return True
    inset = np.zeros(tri.n_triangles, dtype=bool)
    inset[elements] = True
    both = (tri.edge_tris[:, 1] >= 0) & inset[tri.edge_tris[:, 0]] & \
        inset[np.maximum(tri.edge_tris[:, 1], 0)]
    pairs = tri.edge_tris[both]
    adj: dict[int, list[int]] = {int(e): [] for e in elements}
    for a, b in pairs:
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    stack = [int(elements[0])]
    seen = {int(elements[0])}
    while stack:
        k = stack.pop()
        for m in adj[k]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return len(seen) == len(elements)


def save_mesh(tri: Triangulation, path) -> None:
    """Write the native format: `nv nt`, nv lines `x y`, nt lines `i0 i1 i2`."""
    lines = [f"{tri.n_vertices} {tri.n_triangles}"]
    lines.extend(f"{float(x)!r} {float(y)!r}" for x, y in tri.vertices)
    lines.extend(f"{a} {b} {c}" for a, b, c in tri.triangles)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_mesh(path) -> Triangulation:
    """Read the native format and rebuild (re-validating everything)."""
    with open(path) as f:
        tokens = f.read().split()
    nv, nt = int(tokens[0]), int(tokens[1])
    need = 2 + 2 * nv + 3 * nt
    if len(tokens) != need:
        raise ValueError(f"mesh file has {len(tokens)} tokens, expected {need}")
    coords = np.array(tokens[2:2 + 2 * nv], dtype=np.float64).reshape(nv, 2)
    tris = np.array(tokens[2 + 2 * nv:], dtype=np.int64).reshape(nt, 3)
    return build(coords, tris)
