import json
import math

import numpy as np
import pytest

from degenfem import analysis, fem, kernels, meshgen
from degenfem.errors import (
    InadmissibleCorrection,
    InconsistentClassification,
    NonpositiveRadius,
)
from degenfem.geometry import altitude_frame, tri_metrics
from degenfem.interp import (
    CorrectionSpec,
    build_correction,
    bump_phi,
    bump_psi,
    corrected_interpolant,
    correction_h1_seminorm,
    lagrange,
    linear_solution,
    modified_element_interp,
    quadratic_solution,
    sine_solution,
    tangent_plane,
)
from degenfem.mesh import classify

from conftest import random_thin_triangle


# ---------------------------------------------------------------- bumps

def test_phi_endpoint_values():
    val, grad = bump_phi(0.7, np.array([0.0, 0.0]))
    assert val == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(grad, 0.0, atol=1e-15)
    val, grad = bump_phi(0.7, np.array([0.7, 0.0]))
    assert val == 0.0
    np.testing.assert_allclose(grad, 0.0, atol=1e-15)


def test_psi_endpoint_values():
    val, _ = bump_psi(0.4, np.array([0.2, 0.0]))
    assert val == 1.0
    _, grad = bump_psi(0.4, np.array([0.1, 0.1]))
    np.testing.assert_allclose(grad, 0.0, atol=1e-15)
    val, _ = bump_psi(0.4, np.array([0.8, 0.0]))
    assert val == 0.0


@pytest.mark.parametrize("fn", [bump_phi, bump_psi])
def test_bump_gradient_bound(fn, rng):
    r = 0.37
    span = 2.5 * r
    pts = rng.uniform(-span, span, size=(100_000, 2))
    _, grads = fn(r, pts)
    sup = np.hypot(grads[:, 0], grads[:, 1]).max()
    assert sup <= 1.5 / r * (1 + 1e-9)


@pytest.mark.parametrize("fn", [bump_phi, bump_psi])
def test_bump_gradient_matches_fd(fn, rng):
    r = 0.61
    pts = rng.uniform(-2.2 * r, 2.2 * r, size=(10_000, 2))
    step = 1e-6
    _, grads = fn(r, pts)
    for axis in (0, 1):
        e = np.zeros(2)
        e[axis] = step
        up, _ = fn(r, pts + e)
        dn, _ = fn(r, pts - e)
        fd = (up - dn) / (2 * step)
        np.testing.assert_allclose(grads[:, axis], fd, atol=1e-6)


def test_bump_radius_validation():
    with pytest.raises(NonpositiveRadius):
        bump_phi(0.0, np.zeros(2))
    with pytest.raises(NonpositiveRadius):
        bump_psi(-1.0, np.zeros(2))


def test_kernel_bump_eval_matches_direct(rng):
    # the fused kernel agrees with the standalone bump formulas
    u = quadratic_solution()
    pts = rng.uniform(-1, 1, size=(500, 2))
    centers = np.array([[0.1, -0.2], [-0.4, 0.3]])
    radii = np.array([0.5, 0.3])
    kinds = np.array([0, 1], dtype=np.int64)
    amps = np.array([0.7, 0.0])
    plane = tangent_plane(u, centers[1])
    planes = np.array([[0, 0, 0],
                       [plane.value, plane.gradient[0], plane.gradient[1]]])
    w, wx, wy = kernels.bump_eval(
        np.ascontiguousarray(pts), np.ascontiguousarray(u.u_at(pts)),
        np.ascontiguousarray(u.grad_at(pts)), centers, radii, kinds, amps, planes)
    v0, g0 = bump_phi(radii[0], pts - centers[0])
    v1, g1 = bump_psi(radii[1], pts - centers[1])
    diff = plane.at(pts) - u.u_at(pts)
    expect_w = amps[0] * v0 + diff * v1
    expect_g = amps[0] * g0 + diff[:, None] * g1 \
        + (plane.gradient - u.grad_at(pts)) * v1[:, None]
    np.testing.assert_allclose(w, expect_w, atol=1e-13)
    np.testing.assert_allclose(np.stack([wx, wy], axis=1), expect_g, atol=1e-12)


# ------------------------------------------------- manufactured solutions

@pytest.mark.parametrize("u", [quadratic_solution(), sine_solution()])
def test_solution_gradient_consistency(u, rng):
    pts = rng.uniform(0.05, 0.95, size=(200, 2))
    step = 1e-5
    g = u.grad_at(pts)
    for axis in (0, 1):
        e = np.zeros(2)
        e[axis] = step
        fd = (u.u_at(pts + e) - u.u_at(pts - e)) / (2 * step)
        scale = np.maximum(np.abs(g[:, axis]), 1.0)
        assert (np.abs(fd - g[:, axis]) / scale < 1e-6).all()


# ------------------------------------------------------------- lagrange

def test_lagrange_reproduces_linear():
    u = linear_solution(0.3, -1.2, 2.5)
    tri = meshgen.unit_square_uniform(5)
    field = lagrange(u, tri)
    assert analysis.h1_error(u, field, tri) <= 1e-12


def test_lagrange_vertex_value():
    u = quadratic_solution()
    tri = meshgen.unit_square_uniform(4)
    field = lagrange(u, tri)
    vid = int(np.flatnonzero(np.isclose(tri.vertices, 0.5).all(axis=1))[0])
    assert field.values[vid] == pytest.approx(0.5, abs=1e-15)


def test_lagrange_rate():
    u = quadratic_solution()
    hs, errs = [], []
    for n in (8, 16, 32, 64):
        tri = meshgen.unit_square_uniform(n)
        errs.append(analysis.h1_error(u, lagrange(u, tri), tri))
        hs.append(1 / n)
    rate, _ = analysis.fit_rate(hs, errs)
    assert rate == pytest.approx(1.0, abs=0.05)


# ---------------------------------------------------- modified interpolant

def test_modified_interp_exact_on_linear(rng):
    u = linear_solution(1.0, 0.5, -0.25)
    for _ in range(50):
        g = tri_metrics(*random_thin_triangle(rng))
        (va, vb, vc), delta = modified_element_interp(u, g)
        assert delta == pytest.approx(0.0, abs=1e-12)
        b, c = g.base_vertices
        assert va == pytest.approx(float(u.u_at(g.apex)), abs=1e-12)
        assert vb == pytest.approx(float(u.u_at(b)), abs=1e-13)
        assert vc == pytest.approx(float(u.u_at(c)), abs=1e-13)


def element_h1_error(u, g, vals):
    """Exact H1 error of the linear function with the given (apex, b, c)
    values against quadratic u (midpoint rule is exact here)."""
    from degenfem import quadrature

    i = g.max_angle_vertex_index
    verts = g.vertices[[i, (i + 1) % 3, (i + 2) % 3]]
    grad_v = analysis._gradient_from_values(*verts, *vals)
    qpts = quadrature.physical_points(quadrature.MIDPOINT_BARY, verts)
    gu = u.grad_at(qpts)
    sq = ((gu - grad_v) ** 2).sum(axis=1)
    return math.sqrt(float(sq @ quadrature.MIDPOINT_WEIGHTS) * g.area)


def test_modified_interp_bounds(rng):
    u = quadratic_solution()
    for _ in range(1000):
        g = tri_metrics(*random_thin_triangle(rng))
        assert 0.9 * math.pi < g.max_angle < 0.9999 * math.pi
        (va, vb, vc), delta = modified_element_interp(u, g)
        x_k, _, v2 = altitude_frame(g)
        b, c = g.base_vertices
        vertex_bound = (np.hypot(*(x_k - b)) * np.hypot(*(x_k - c))
                        + np.hypot(*(x_k - g.apex)) ** 2) * u.seminorm_2inf
        assert abs(delta) <= vertex_bound
        h1 = element_h1_error(u, g, (va, vb, vc))
        assert h1 <= math.sqrt(13) * g.diameter * u.seminorm_2inf * math.sqrt(g.area)


def test_modified_interp_matches_normal_derivative(rng):
    u = quadratic_solution()
    g = tri_metrics(*random_thin_triangle(rng))
    (va, vb, vc), _ = modified_element_interp(u, g)
    i = g.max_angle_vertex_index
    verts = g.vertices[[i, (i + 1) % 3, (i + 2) % 3]]
    grad_v = analysis._gradient_from_values(*verts, va, vb, vc)
    x_k, _, v2 = altitude_frame(g)
    assert grad_v @ v2 == pytest.approx(float(u.grad_at(x_k) @ v2), abs=1e-10)


# --------------------------------------------------------- tangent plane

def test_tangent_plane():
    lin = linear_solution(2.0, -1.0, 0.5)
    plane = tangent_plane(lin, (0.3, 0.4))
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [0.2, -0.7]])
    np.testing.assert_allclose(plane.at(pts), lin.u_at(pts), atol=1e-14)

    u = quadratic_solution()
    plane0 = tangent_plane(u, (0.0, 0.0))
    np.testing.assert_allclose(plane0.at(pts), 0.0, atol=1e-14)


def test_tangent_plane_taylor_bound(rng):
    u = quadratic_solution()
    x_c = rng.uniform(-1, 1, 2)
    plane = tangent_plane(u, x_c)
    pts = rng.uniform(-2, 2, size=(1000, 2))
    err = np.abs(u.u_at(pts) - plane.at(pts))
    dist2 = ((pts - x_c) ** 2).sum(axis=1)
    assert (err <= dist2 * u.seminorm_2inf + 1e-13).all()


# ------------------------------------------------------ correction spec

def test_correction_uniform_no_bumps():
    u = quadratic_solution()
    tri = meshgen.unit_square_uniform(8)
    cls = classify(tri, 0.51 * math.pi)
    spec = build_correction(u, tri, cls)
    assert spec.admissible
    assert spec.bumps == []
    corrected = corrected_interpolant(u, tri, spec)
    np.testing.assert_array_equal(corrected.values, lagrange(u, tri).values)


def test_correction_subdivided_band():
    u = quadratic_solution()
    tri, meta = meshgen.subdivided_band_mesh(8, 1 / 512)
    cls = classify(tri, 0.9 * math.pi)
    spec = build_correction(u, tri, cls)
    assert spec.admissible
    assert len(spec.bumps) == len(meta["tilde_elements"])
    for b in spec.bumps:
        g = tri.element_geom(b.element)
        bb, cc = g.base_vertices
        r_expect = 0.5 * min(np.hypot(*(g.apex - bb)), np.hypot(*(g.apex - cc)))
        assert b.radius == pytest.approx(r_expect, rel=1e-12)

    corrected = corrected_interpolant(u, tri, spec)
    plain = lagrange(u, tri)
    # apex perturbation realizes each element's modified interpolant
    for b in spec.bumps:
        k = b.element
        apex_id = tri.triangles[k][tri.max_angle_vertex[k]]
        got = corrected.values[apex_id] - plain.values[apex_id]
        assert got == pytest.approx(b.amplitude, abs=1e-13)
    # untouched everywhere else
    touched = {tri.triangles[b.element][tri.max_angle_vertex[b.element]]
               for b in spec.bumps}
    others = np.setdiff1d(np.arange(tri.n_vertices), sorted(touched))
    np.testing.assert_array_equal(corrected.values[others], plain.values[others])


def test_correction_h1_bound():
    u = quadratic_solution()
    tri, _ = meshgen.subdivided_band_mesh(8, 1 / 512)
    cls = classify(tri, 0.9 * math.pi)
    spec = build_correction(u, tri, cls)
    wnorm = correction_h1_seminorm(spec, u, tri, cls.t1)
    assert wnorm <= 6.0 * tri.mesh_size_h * u.seminorm_2inf


def test_correction_rejects_plain_band():
    u = quadratic_solution()
    tri, _ = meshgen.single_band_mesh(8, 1 / 512)
    cls = classify(tri, 0.9 * math.pi)
    spec = build_correction(u, tri, cls)
    assert not spec.admissible
    assert any(v["check"] == "b_foreign_vertex" for v in spec.violations)
    with pytest.raises(InadmissibleCorrection):
        corrected_interpolant(u, tri, spec)


def test_correction_cluster():
    u = quadratic_solution()
    tri, info = meshgen.cluster_mesh(8, (3, 3, 2), 16)
    cls = classify(tri, 0.75 * math.pi)
    assert set(cls.t2.tolist()) <= set(info["elements"].tolist())
    spec = build_correction(u, tri, cls, clusters=[info["elements"]])
    assert len([b for b in spec.bumps if b.kind == "psi"]) == 1
    psi = [b for b in spec.bumps if b.kind == "psi"][0]
    assert psi.radius == pytest.approx(info["diameter"], rel=1e-12)
    if spec.admissible:
        corrected = corrected_interpolant(u, tri, spec)
        # on the cluster the interpolant is the tangent plane
        cverts = np.unique(tri.triangles[info["elements"]].ravel())
        np.testing.assert_allclose(
            corrected.values[cverts], psi.plane.at(tri.vertices[cverts]),
            atol=1e-12)


def test_correction_inconsistent_classification():
    u = quadratic_solution()
    tri = meshgen.unit_square_uniform(4)
    cls = classify(tri, 0.51 * math.pi)
    bad = type(cls)(alpha0=cls.alpha0, t1=cls.t1[:-1], t2=cls.t2)
    with pytest.raises(InconsistentClassification):
        build_correction(u, tri, bad)


def test_correction_spec_json_roundtrip():
    u = quadratic_solution()
    tri, _ = meshgen.subdivided_band_mesh(8, 1 / 512)
    cls = classify(tri, 0.9 * math.pi)
    spec = build_correction(u, tri, cls)
    again = CorrectionSpec.from_json(spec.to_json())
    assert again.admissible == spec.admissible
    assert len(again.bumps) == len(spec.bumps)
    assert again.bumps[0].amplitude == spec.bumps[0].amplitude
    json.loads(spec.to_json())  # well-formed
