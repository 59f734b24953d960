"""Generators for structured mesh families: uniform grids, band strips,
Babuska-Aziz multi-band grids, subdivided-band chains, cluster patches.

All row-structured meshes share one mechanism: horizontal vertex lines whose
x-offsets alternate between integer multiples of the base spacing and
half-offset positions (plus the two endpoints, which produce the boundary
cut-off elements).  Zig-zag triangulation of each strip then yields the
alternating band pattern automatically, and conformity along the lines is
free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BandInconsistent,
    BlockOutOfRange,
    InvalidParameters,
    InvalidRowSpec,
)
from .mesh import Triangulation, build


@dataclass
class Band:
    """Ordered alternating element chain along a straight edge line.

    ``odd_elements`` have their base (longest edge, for thin strips) on the
    band line; ``even_elements`` are the inverted elements between them whose
    maximum-angle vertex lies on the line.  ``alternating`` records whether
    the maximum-angle vertices actually alternate sides of the line, which
    holds when the strip height is below half the base spacing.
    """

    odd_elements: np.ndarray
    even_elements: np.ndarray
    gamma_edges: np.ndarray       # (n, 2) vertex ids, ordered along the line
    length_L: float
    direction_g: np.ndarray       # unit vector along the line
    base_h: float
    height_hbar: float
    alternating: bool
    gamma_y: float = 0.0

    def to_dict(self) -> dict:
        return {
            "odd_elements": [int(v) for v in self.odd_elements],
            "even_elements": [int(v) for v in self.even_elements],
            "gamma_edges": [[int(a), int(b)] for a, b in self.gamma_edges],
            "length_L": self.length_L,
            "direction_g": [float(self.direction_g[0]), float(self.direction_g[1])],
            "base_h": self.base_h,
            "height_hbar": self.height_hbar,
            "alternating": self.alternating,
            "gamma_y": self.gamma_y,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Band":
        return cls(
            odd_elements=np.asarray(d["odd_elements"], dtype=np.int64),
            even_elements=np.asarray(d["even_elements"], dtype=np.int64),
            gamma_edges=np.asarray(d["gamma_edges"], dtype=np.int64).reshape(-1, 2),
            length_L=float(d["length_L"]),
            direction_g=np.asarray(d["direction_g"], dtype=float),
            base_h=float(d["base_h"]),
            height_hbar=float(d["height_hbar"]),
            alternating=bool(d["alternating"]),
            gamma_y=float(d.get("gamma_y", 0.0)),
        )


@dataclass
class RowSpec:
    """Horizontal vertex lines for the strip generator.

    y_levels start at 0 and end at 1, strictly increasing; offset_parity has
    one entry per level (0 = points at i*h, 1 = points at (i+1/2)*h plus the
    endpoints) and must alternate between consecutive levels.
    """

    y_levels: np.ndarray
    offset_parity: np.ndarray

    def validate(self) -> None:
        y = np.asarray(self.y_levels, dtype=float)
        p = np.asarray(self.offset_parity)
        if len(y) < 2 or len(p) != len(y):
            raise InvalidRowSpec("need one parity per level and at least 2 levels")
        if y[0] != 0.0 or y[-1] != 1.0:
            raise InvalidRowSpec("y_levels must start at 0 and end at 1")
        if (np.diff(y) <= 0).any():
            raise InvalidRowSpec("y_levels must be strictly increasing")
        if not np.isin(p, (0, 1)).all():
            raise InvalidRowSpec("parities must be 0 or 1")
        if (p[1:] == p[:-1]).any():
            raise InvalidRowSpec("consecutive levels must alternate parity")


def unit_square_uniform(n: int) -> Triangulation:
    """Uniform right-triangle grid: 2*n^2 elements with legs 1/n."""
    if n < 1:
        raise InvalidParameters("n must be >= 1")
    coords = np.linspace(0.0, 1.0, n + 1)
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    verts = np.column_stack([xs.ravel(), ys.ravel()])

    def vid(p, q):
        return q * (n + 1) + p

    tris = []
    for q in range(n):
        for p in range(n):
            sw, se = vid(p, q), vid(p + 1, q)
            ne, nw = vid(p + 1, q + 1), vid(p, q + 1)
            tris.append((sw, se, ne))
            tris.append((sw, ne, nw))
    return build(verts, np.asarray(tris, dtype=np.int64))


def _even_xs(nx: int, x0: float = 0.0, x1: float = 1.0) -> np.ndarray:
    return np.linspace(x0, x1, nx + 1)

def _odd_xs(nx: int, x0: float = 0.0, x1: float = 1.0) -> np.ndarray:
    h = (x1 - x0) / nx
    inner = x0 + (np.arange(nx) + 0.5) * h
    return np.concatenate([[x0], inner, [x1]])


def _zigzag_strip(ids_a, s_a, ids_b, s_b):
    """Triangle strip between point rows a and b sharing first/last coordinate.

    Points are merged by the 1D coordinate s.  Advancing a side creates a
    triangle whose base is the new segment on that side.  Returns
    (triangles, base_info) with base_info entries
    (side, left_id, right_id, base_len).
    """
    tris = []
    info = []
    ia = ib = 0
    na, nb = len(s_a), len(s_b)
    while ia < na - 1 or ib < nb - 1:
        can_a = ia < na - 1
        can_b = ib < nb - 1
        if can_a and can_b:
            adv_a = (s_a[ia + 1], s_a[ia]) <= (s_b[ib + 1], s_b[ib])
        else:
            adv_a = can_a
        if adv_a:
            tris.append((ids_a[ia], ids_a[ia + 1], ids_b[ib]))
            info.append((0, ids_a[ia], ids_a[ia + 1], s_a[ia + 1] - s_a[ia]))
            ia += 1
        else:
            tris.append((ids_a[ia], ids_b[ib + 1], ids_b[ib]))
            info.append((1, ids_b[ib], ids_b[ib + 1], s_b[ib + 1] - s_b[ib]))
            ib += 1
    return tris, info


def _orient_ccw(verts: np.ndarray, tris: list) -> np.ndarray:
    t = np.asarray(tris, dtype=np.int64)
    p = verts[t]
    cross = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
             - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    flip = cross < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    return t


def row_mesh(rows: RowSpec, base_h: float):
    """Strip mesh of the unit square; one Band record per strip.

    Bands sit on the even-parity line of their strip.  Cut-off elements at
    the strip ends are excluded from the band element lists.
    """
    rows.validate()
    nx = round(1.0 / base_h)
    if abs(nx * base_h - 1.0) > 1e-9:
        raise InvalidRowSpec("1/base_h must be an integer")

    y_levels = np.asarray(rows.y_levels, dtype=float)
    parity = np.asarray(rows.offset_parity, dtype=int)
    line_ids = []
    line_xs = []
    pts = []
    for y, par in zip(y_levels, parity):
        xs = _even_xs(nx) if par == 0 else _odd_xs(nx)
        start = len(pts)
        pts.extend((x, y) for x in xs)
        line_ids.append(np.arange(start, start + len(xs), dtype=np.int64))
        line_xs.append(xs)
    verts = np.asarray(pts, dtype=float)

    all_tris = []
    strip_infos = []
    for s in range(len(y_levels) - 1):
        tris, info = _zigzag_strip(line_ids[s], line_xs[s],
                                   line_ids[s + 1], line_xs[s + 1])
        offset = len(all_tris)
        all_tris.extend(tris)
        strip_infos.append((offset, info, s))

    tri_arr = _orient_ccw(verts, all_tris)
    tri = build(verts, tri_arr)

    bands = []
    for offset, info, s in strip_infos:
        even_side = 0 if parity[s] == 0 else 1
        gamma_y = y_levels[s] if even_side == 0 else y_levels[s + 1]
        height = y_levels[s + 1] - y_levels[s]
        k_ids, k_edges, kt_ids = [], [], []
        for t, (side, left, right, blen) in enumerate(info):
            if side == even_side:
                k_ids.append(offset + t)
                k_edges.append((left, right))
            elif blen > 0.75 * base_h:
                kt_ids.append(offset + t)
        band = Band(
            odd_elements=np.asarray(k_ids, dtype=np.int64),
            even_elements=np.asarray(kt_ids, dtype=np.int64),
            gamma_edges=np.asarray(k_edges, dtype=np.int64).reshape(-1, 2),
            length_L=1.0,
            direction_g=np.array([1.0, 0.0]),
            base_h=base_h,
            height_hbar=float(height),
            alternating=_pattern_alternates(tri, k_ids, kt_ids, gamma_y, height),
            gamma_y=float(gamma_y),
        )
        bands.append(band)
    return tri, bands


def _pattern_alternates(tri, k_ids, kt_ids, gamma_y, height) -> bool:
    tol = 0.5 * height
    for ids, on_line in ((k_ids, False), (kt_ids, True)):
        if len(ids) == 0:
            continue
        ids = np.asarray(ids)
        apex = tri.triangles[ids, tri.max_angle_vertex[ids]]
        dy = np.abs(tri.vertices[apex, 1] - gamma_y)
        if on_line and (dy > tol).any():
            return False
        if not on_line and (dy <= tol).any():
            return False
    return True


def babuska_aziz(nx: int, ny: int):
    """Unit square tiled by ny identical band strips of base 1/nx, height 1/ny."""
    if nx < 1 or ny < 1:
        raise InvalidParameters("nx, ny must be >= 1")
    rows = RowSpec(np.linspace(0.0, 1.0, ny + 1), np.arange(ny + 1) % 2)
    return row_mesh(rows, 1.0 / nx)


def single_band_mesh(nx: int, hbar: float):
    """One thin strip of height hbar at y = 0.5 inside a shape-regular mesh.

    All strips outside the band have aspect ratio in [1/2, 2], hence maximum
    angles at most 3*pi/4 independent of hbar.
    """
    h = 1.0 / nx
    if not 0.0 < hbar < h / 2.0:
        raise InvalidParameters("need 0 < hbar < 1/(2 nx)")
    m_below = max(1, round(0.5 * nx))
    top = 0.5 - hbar
    m_above = max(1, round(top * nx))
    y = np.concatenate([
        np.linspace(0.0, 0.5, m_below + 1),
        np.linspace(0.5 + hbar, 1.0, m_above + 1),
    ])
    par = (np.arange(len(y)) - m_below) % 2
    tri, bands = row_mesh(RowSpec(y, par), h)
    return tri, bands[m_below]


def non_band_max_angle(tri: Triangulation, band: Band) -> float:
    """Largest maximum angle over elements outside the band strip."""
    mask = np.ones(tri.n_triangles, dtype=bool)
    mask[band.odd_elements] = False
    mask[band.even_elements] = False
    return float(tri.max_angles[mask].max())


def subdivided_band_mesh(nx: int, hbar: float):
    """Single-band mesh with every band-line element split at its altitude foot.

    Each element whose longest edge lies on the band line is cut from its
    apex to the foot of its altitude (the base midpoint), and so is its
    neighbor across the line; all four halves are right triangles and join
    the regular part of the mesh.  The remaining thin elements form a chain
    whose apex separations satisfy the correction-function admissibility
    conditions.

    Returns (triangulation, metadata); metadata holds the surviving thin
    element ids, the refined band-line edges and the generator parameters.
    """
    base_tri, band = single_band_mesh(nx, hbar)
    h = 1.0 / nx
    verts = np.asarray(base_tri.vertices)
    old_tris = np.asarray(base_tri.triangles)

    removed: dict[int, list] = {}
    new_pts = []
    gamma_edges = []
    for idx, (kid, edge) in enumerate(zip(band.odd_elements, band.gamma_edges)):
        bi, bj = int(edge[0]), int(edge[1])
        mid = 0.5 * (verts[bi] + verts[bj])
        mid_id = len(verts) + len(new_pts)
        new_pts.append(mid)
        gamma_edges.append((bi, mid_id))
        gamma_edges.append((mid_id, bj))
        t0, t1 = base_tri.edge_triangles(bi, bj)
        neighbor = t1 if t0 == kid else t0
        apex_k = int(np.setdiff1d(old_tris[kid], [bi, bj])[0])
        apex_n = int(np.setdiff1d(old_tris[neighbor], [bi, bj])[0])
        removed[int(kid)] = [(bi, mid_id, apex_k), (mid_id, bj, apex_k)]
        removed[int(neighbor)] = [(bi, mid_id, apex_n), (mid_id, bj, apex_n)]

    keep_mask = np.ones(len(old_tris), dtype=bool)
    keep_mask[list(removed)] = False
    old_to_new = np.cumsum(keep_mask) - 1
    new_tris = [tuple(t) for t in old_tris[keep_mask]]
    for k in sorted(removed):
        new_tris.extend(removed[k])

    all_verts = np.vstack([verts, np.asarray(new_pts)])
    tri = build(all_verts, _orient_ccw(all_verts, new_tris))

    tilde = old_to_new[band.even_elements]
    meta = {
        "tilde_elements": tilde.astype(np.int64),
        "gamma_edges": np.asarray(gamma_edges, dtype=np.int64),
        "gamma_y": band.gamma_y,
        "base_h": h,
        "hbar": hbar,
        "split_elements": 2 * len(band.odd_elements),
    }
    return tri, meta


def cluster_mesh(n: int, block: tuple, rows_in_block: int):
    """Uniform n-grid with a k x k block replaced by thin zig-zag rows.

    Block line endpoints land on the block's vertical boundary; the two
    grid-cell columns flanking the block are re-triangulated as vertical
    strips whose sliver elements (the fans) are absorbed into the cluster,
    so the outer grid is untouched.  Returns (triangulation, info) where
    info lists the cluster elements, the block diagonal k*sqrt(2)/n and the
    measured cluster diameter.
    """
    bi, bj, k = block
    rows = rows_in_block
    if k < 1 or rows < 1:
        raise InvalidParameters("block size and rows must be >= 1")
    if not (1 <= bi and 1 <= bj and bi + k <= n - 1 and bj + k <= n - 1):
        raise BlockOutOfRange("block must fit with a one-cell margin")

    reg: dict = {}
    pts: list = []

    def vid(x: float, y: float) -> int:
        key = (round(x * 1e12), round(y * 1e12))
        p = reg.get(key)
        if p is None:
            p = len(pts)
            reg[key] = p
            pts.append((x, y))
        return p

    tris: list = []
    cluster: list = []

    # outer ordinary cells (block and flanking margin columns excluded)
    for p in range(n):
        for q in range(n):
            in_block = bi <= p < bi + k and bj <= q < bj + k
            in_margin = p in (bi - 1, bi + k) and bj <= q < bj + k
            if in_block or in_margin:
                continue
            sw = vid(p / n, q / n)
            se = vid((p + 1) / n, q / n)
            ne = vid((p + 1) / n, (q + 1) / n)
            nw = vid(p / n, (q + 1) / n)
            tris.append((sw, se, ne))
            tris.append((sw, ne, nw))

    # block rows
    x0, x1 = bi / n, (bi + k) / n
    line_ys = [(bj * rows + t * k) / (rows * n) for t in range(rows + 1)]
    par = [t % 2 for t in range(rows + 1)]
    par[-1] = 0
    line_ids = []
    line_xs = []
    for y, pr in zip(line_ys, par):
        xs = _even_xs(k, x0, x1) if pr == 0 else _odd_xs(k, x0, x1)
        ids = np.array([vid(x, y) for x in xs], dtype=np.int64)
        line_ids.append(ids)
        line_xs.append(xs)
    for s in range(rows):
        st, _ = _zigzag_strip(line_ids[s], line_xs[s], line_ids[s + 1], line_xs[s + 1])
        cluster.extend(range(len(tris), len(tris) + len(st)))
        tris.extend(st)

    # flanking vertical strips (fans)
    grid_ys = [q / n for q in range(bj, bj + k + 1)]
    for side_x, grid_x in (((bi) / n, (bi - 1) / n), ((bi + k) / n, (bi + k + 1) / n)):
        block_ids = np.array([vid(side_x, y) for y in line_ys], dtype=np.int64)
        grid_ids = np.array([vid(grid_x, y) for y in grid_ys], dtype=np.int64)
        st, _ = _zigzag_strip(grid_ids, np.asarray(grid_ys),
                              block_ids, np.asarray(line_ys))
        cluster.extend(range(len(tris), len(tris) + len(st)))
        tris.extend(st)

    verts = np.asarray(pts, dtype=float)
    tri = build(verts, _orient_ccw(verts, tris))

    cluster_ids = np.asarray(sorted(cluster), dtype=np.int64)
    cverts = np.unique(tri.triangles[cluster_ids].ravel())
    cxy = tri.vertices[cverts]
    d2 = ((cxy[:, None, :] - cxy[None, :, :]) ** 2).sum(axis=2)
    info = {
        "elements": cluster_ids,
        "block_diagonal": k * np.sqrt(2.0) / n,
        "diameter": float(np.sqrt(d2.max())),
        "rows_in_block": rows,
        "block": (bi, bj, k),
    }
    return tri, info


def validate_band(band: Band, tri: Triangulation, require_alternating=None) -> None:
    """Check the band record against the mesh; raises BandInconsistent.

    Structural invariants (shared edges, collinear band line, length) are
    always enforced; the alternating max-angle pattern is enforced when the
    band claims it (or as overridden by require_alternating).
    """
    odd = np.asarray(band.odd_elements)
    even = np.asarray(band.even_elements)
    gamma = np.asarray(band.gamma_edges).reshape(-1, 2)
    if len(odd) < 1 or len(gamma) != len(odd):
        raise BandInconsistent("need one band-line edge per odd element")
    if len(even) != len(odd) - 1:
        raise BandInconsistent("even elements must interleave the odd ones")

    for kid, (a, b) in zip(odd, gamma):
        if not {int(a), int(b)} <= set(tri.triangles[kid]):
            raise BandInconsistent(f"edge ({a},{b}) is not an edge of element {kid}")
        if tri.edge_id(int(a), int(b)) < 0:
            raise BandInconsistent(f"({a},{b}) is not a mesh edge")
    for i, kt in enumerate(even):
        for neighbor in (odd[i], odd[i + 1]):
            shared = np.intersect1d(tri.triangles[kt], tri.triangles[neighbor])
            if len(shared) != 2:
                raise BandInconsistent(
                    f"element {kt} does not share an edge with {neighbor}"
                )

    chain = [gamma[0, 0]] + [e[1] for e in gamma]
    p = tri.vertices[np.asarray(chain)]
    a, b = p[0], p[-1]
    direction = b - a
    length = float(np.hypot(*direction))
    direction = direction / length
    dev = np.abs((p[:, 0] - a[0]) * direction[1] - (p[:, 1] - a[1]) * direction[0])
    if dev.max() > 1e-12 * max(length, 1.0):
        raise BandInconsistent("band-line vertices are not collinear")
    seg_lens = np.hypot(*(np.diff(p, axis=0).T))
    if abs(float(seg_lens.sum()) - band.length_L) > 1e-12 * max(band.length_L, 1.0):
        raise BandInconsistent("length_L does not match the edge lengths")
    if np.hypot(*(np.asarray(band.direction_g) - direction)) > 1e-12 and \
       np.hypot(*(np.asarray(band.direction_g) + direction)) > 1e-12:
        raise BandInconsistent("direction_g is not aligned with the band line")

    check_pattern = band.alternating if require_alternating is None else require_alternating
    if check_pattern:
        if not _pattern_alternates(tri, odd, even, band.gamma_y,
                                   band.height_hbar):
            raise BandInconsistent("maximum-angle vertices do not alternate")
