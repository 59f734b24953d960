import math

import numpy as np
import pytest

from degenfem import analysis, meshgen
from degenfem.errors import BoundaryMismatch
from degenfem.fem import assemble, cea_check, energy_product_exact, solve
from degenfem.interp import (
    NodalField,
    lagrange,
    linear_solution,
    quadratic_solution,
)


def test_single_interior_vertex_stiffness():
    # n=2 grid has one interior vertex; its eliminated stiffness is 4
    u = quadratic_solution()
    tri = meshgen.unit_square_uniform(2)
    sys = assemble(tri, u)
    assert sys.matrix.shape == (1, 1)
    assert sys.matrix[0, 0] == pytest.approx(4.0, abs=1e-13)


def test_full_matrix_row_sums_zero():
    u = quadratic_solution()
    for tri in (meshgen.unit_square_uniform(4),
                meshgen.single_band_mesh(8, 1 / 512)[0]):
        sys = assemble(tri, u)
        rows = np.asarray(sys.full_matrix.sum(axis=1)).ravel()
        assert np.abs(rows).max() <= 1e-10


def test_matrix_symmetry():
    u = quadratic_solution()
    tri, _ = meshgen.babuska_aziz(4, 16)
    sys = assemble(tri, u)
    asym = (sys.matrix - sys.matrix.T).tocoo()
    scale = np.abs(sys.matrix.data).max()
    assert (np.abs(asym.data) <= 1e-13 * scale).all() if asym.nnz else True


def test_linear_solution_exact():
    u = linear_solution(0.7, -2.0, 1.1)
    tri = meshgen.unit_square_uniform(6)
    field = solve(assemble(tri, u))
    exact = u.u_at(tri.vertices)
    np.testing.assert_allclose(field.values, exact, atol=1e-12)
    assert analysis.h1_error(u, field, tri) <= 1e-11


def test_solver_residual_on_band_mesh():
    u = quadratic_solution()
    tri, _ = meshgen.babuska_aziz(8, 64)
    sys = assemble(tri, u)
    field = solve(sys)
    x = field.values[sys.interior]
    resid = np.linalg.norm(sys.matrix @ x - sys.rhs) / np.linalg.norm(sys.rhs)
    assert resid <= 1e-12


def test_solve_deterministic():
    u = quadratic_solution()
    tri, _ = meshgen.single_band_mesh(8, 1 / 512)
    sys = assemble(tri, u)
    a = solve(sys).values
    b = solve(sys).values
    assert np.array_equal(a, b)


def test_galerkin_orthogonality(rng):
    u = quadratic_solution()
    tri = meshgen.unit_square_uniform(16)
    sys = assemble(tri, u)
    U = solve(sys)
    err = analysis.h1_error(u, U, tri)
    for _ in range(20):
        v = np.zeros(tri.n_vertices)
        v[sys.interior] = rng.standard_normal(len(sys.interior))
        vh = NodalField(values=v, tri=tri)
        a_u_v = energy_product_exact(u, tri, vh)
        a_U_v = float(U.values @ (sys.full_matrix @ v))
        v_norm = math.sqrt(float(v @ (sys.full_matrix @ v)))
        assert abs(a_u_v - a_U_v) <= 1e-9 * err * v_norm


def test_cea_self_and_lagrange():
    u = quadratic_solution()
    tri = meshgen.unit_square_uniform(16)
    U = solve(assemble(tri, u))
    report = cea_check(u, tri, U, [U, lagrange(u, tri)])
    assert report["all_ok"]
    assert report["candidates"][0]["err"] == pytest.approx(report["err_U"])
    # discrete solution is at least as good as the interpolant
    assert report["err_U"] <= report["candidates"][1]["err"] * (1 + 1e-9)


def test_cea_boundary_mismatch():
    u = quadratic_solution()
    tri = meshgen.unit_square_uniform(4)
    U = solve(assemble(tri, u))
    bad = NodalField(values=U.values + 1.0, tri=tri)
    with pytest.raises(BoundaryMismatch):
        cea_check(u, tri, U, [bad])
