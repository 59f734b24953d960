import math

import numpy as np
import pytest

from degenfem import meshgen
from degenfem.errors import (
    DuplicateVertex,
    InvertedElement,
    NonConforming,
)
from degenfem.mesh import (
    build,
    classify,
    element_subset_boundary_loops,
    load_mesh,
    save_mesh,
)


def unit_square_pair():
    verts = [(0, 0), (1, 0), (1, 1), (0, 1)]
    tris = [(0, 1, 2), (0, 2, 3)]
    return build(verts, tris)


def test_two_triangle_square():
    tri = unit_square_pair()
    boundary = tri.edge_tris[:, 1] < 0
    assert (~boundary).sum() == 1
    assert boundary.sum() == 4
    assert tri.areas.sum() == pytest.approx(1.0, abs=1e-15)
    assert tri.boundary_vertex_flags.all()
    assert tri.edge_triangles(0, 2) == (0, 1)


def test_half_edge_overlap_nonconforming():
    # second triangle hangs a vertex at (0.5, 0) inside the first one's edge
    verts = [(0, 0), (1, 0), (0.5, 1), (0.5, 0), (1.5, 0), (1, -1)]
    tris = [(0, 1, 2), (3, 5, 4)]
    with pytest.raises(NonConforming):
        build(verts, tris)


def test_inverted_element():
    verts = [(0, 0), (1, 0), (0, 1)]
    with pytest.raises(InvertedElement):
        build(verts, [(0, 2, 1)])


def test_duplicate_vertex():
    verts = [(0, 0), (1, 0), (0, 1), (1e-15, 0)]
    with pytest.raises(DuplicateVertex):
        build(verts, [(0, 1, 2), (3, 2, 1)])


def test_edge_shared_three_times():
    verts = [(0, 0), (1, 0), (0, 1), (0.5, 1.5), (0, -1)]
    tris = [(0, 1, 2), (0, 4, 1), (0, 1, 3)]  # three elements on edge (0,1)
    with pytest.raises(NonConforming):
        build(verts, tris)


def test_generator_output_validates():
    tri, _ = meshgen.babuska_aziz(8, 64)
    assert abs(tri.areas.sum() - 1.0) <= 1e-10
    rebuilt = build(tri.vertices.copy(), tri.triangles.copy())
    assert rebuilt.n_triangles == tri.n_triangles


def test_classify_uniform():
    tri = meshgen.unit_square_uniform(4)
    cls = classify(tri, 0.51 * math.pi)
    assert len(cls.t2) == 0
    assert len(cls.t1) == tri.n_triangles


def test_classify_near_pi_over_3():
    tri = unit_square_pair()
    cls = classify(tri, math.pi / 3 + 1e-9)
    # right triangles have max angle pi/2 > pi/3 + eps
    assert len(cls.t2) == tri.n_triangles


def test_classify_monotone():
    tri, _ = meshgen.single_band_mesh(8, 1 / 64)
    prev = None
    for alpha0 in (0.4 * math.pi, 0.6 * math.pi, 0.8 * math.pi, 0.95 * math.pi):
        t2 = set(classify(tri, alpha0).t2.tolist())
        if prev is not None:
            assert t2 <= prev
        prev = t2


def test_classify_single_band():
    tri, band = meshgen.single_band_mesh(16, (1 / 16) ** 3)
    cls = classify(tri, 0.9 * math.pi)
    strip = set(band.odd_elements.tolist()) | set(band.even_elements.tolist())
    assert set(cls.t2.tolist()) <= strip
    # every interior strip element degenerates, so t2 is exactly the strip
    assert set(cls.t2.tolist()) == strip


def test_mesh_io_roundtrip(tmp_path):
    tri, _ = meshgen.single_band_mesh(4, 1e-3)
    p1 = tmp_path / "m.txt"
    save_mesh(tri, p1)
    tri2 = load_mesh(p1)
    assert np.array_equal(tri.vertices, tri2.vertices)
    assert np.array_equal(tri.triangles, tri2.triangles)
    p2 = tmp_path / "m2.txt"
    save_mesh(tri2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_boundary_loops():
    tri = meshgen.unit_square_uniform(4)
    all_ids = np.arange(tri.n_triangles)
    assert element_subset_boundary_loops(tri, all_ids) == 1
    # removing the center cells leaves a ring with two loops
    ring = [k for k in all_ids if k not in _center_cells(tri)]
    assert element_subset_boundary_loops(tri, ring) == 2


def _center_cells(tri):
    out = []
    for k in range(tri.n_triangles):
        c = tri.vertices[tri.triangles[k]].mean(axis=0)
        if 0.25 < c[0] < 0.75 and 0.25 < c[1] < 0.75:
            out.append(k)
    return out
