"""P1 conforming FEM for -laplace(u) = f with Dirichlet data, plus the
Galerkin-optimality oracle.

Dirichlet values are eliminated (interior system), preserving the exact
affine-space structure the optimality check relies on.  The solver is a
direct sparse factorization polished by iterative refinement, with a
diagonally preconditioned CG fallback: the band meshes with hbar = h^3 are
severely ill-conditioned and an iterative-only path risks silent inaccuracy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels, quadrature
from .errors import BoundaryMismatch, SolverBreakdown
from .interp import ManufacturedSolution, NodalField
from .mesh import Triangulation

RESIDUAL_TARGET = 1e-12
CG_MAX_ITER = 1_000_000


@dataclass
class LinearSystem:
    """Eliminated interior system A x = b with the boundary data kept around."""

    matrix: sp.csr_matrix          # interior x interior, SPD
    rhs: np.ndarray
    dirichlet_values: np.ndarray   # one value per boundary vertex
    interior: np.ndarray           # vertex ids of the unknowns
    boundary: np.ndarray           # vertex ids of the Dirichlet nodes
    full_matrix: sp.csr_matrix     # all-vertex stiffness (row sums zero)
    tri: Triangulation


def assemble(tri: Triangulation, u: ManufacturedSolution) -> LinearSystem:
    """Exact P1 stiffness, midpoint-rule load, nodal Dirichlet lifting."""
    local = kernels.stiffness_local(tri.vertices, tri.triangles)
    rows = np.repeat(tri.triangles, 3, axis=1).ravel()
    cols = np.tile(tri.triangles, (1, 3)).ravel()
    nv = tri.n_vertices
    full = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()

    # load: edge-midpoint rule, exact through degree 2
    p = tri.vertices[tri.triangles]
    mids = quadrature.physical_points(quadrature.MIDPOINT_BARY, p)  # (nt, 3, 2)
    fvals = u.f_at(mids)
    # hat_i at midpoint j is MIDPOINT_BARY[j, i] (1/2 on the two adjacent edges)
    contrib = (tri.areas[:, None] / 3.0) * (fvals @ quadrature.MIDPOINT_BARY)
    b = np.zeros(nv)
    np.add.at(b, tri.triangles.ravel(), contrib.ravel())

    boundary = np.flatnonzero(tri.boundary_vertex_flags)
    interior = np.flatnonzero(~tri.boundary_vertex_flags)
    g = u.u_at(tri.vertices[boundary])
    rhs = b[interior] - full[interior][:, boundary] @ g
    matrix = full[interior][:, interior].tocsr()
    return LinearSystem(matrix=matrix, rhs=rhs, dirichlet_values=g,
                        interior=interior, boundary=boundary,
                        full_matrix=full, tri=tri)


def _residual(matrix, x, rhs) -> float:
    scale = float(np.linalg.norm(rhs))
    if scale == 0.0:
        scale = 1.0
    return float(np.linalg.norm(matrix @ x - rhs)) / scale


def solve(sys: LinearSystem) -> NodalField:
    """Direct solve with iterative refinement; CG fallback; deterministic."""
    x = None
    if sys.matrix.shape[0] > 0:
        try:
            lu = spla.splu(sys.matrix.tocsc())
            x = lu.solve(sys.rhs)
            for _ in range(5):
                if _residual(sys.matrix, x, sys.rhs) <= RESIDUAL_TARGET:
                    break
                x = x + lu.solve(sys.rhs - sys.matrix @ x)
        except RuntimeError:
            x = None
        if x is not None and _residual(sys.matrix, x, sys.rhs) > RESIDUAL_TARGET:
            x = None
        if x is None:
            diag = sys.matrix.diagonal()
            precond = spla.LinearOperator(sys.matrix.shape,
                                          matvec=lambda v: v / diag)
            x, code = spla.cg(sys.matrix, sys.rhs, rtol=RESIDUAL_TARGET / 10,
                              atol=0.0, maxiter=CG_MAX_ITER, M=precond)
            if code != 0 or _residual(sys.matrix, x, sys.rhs) > RESIDUAL_TARGET:
                raise SolverBreakdown(
                    f"residual {_residual(sys.matrix, x, sys.rhs):.3e} above "
                    f"target {RESIDUAL_TARGET:.1e}"
                )
    values = np.empty(sys.tri.n_vertices)
    if sys.matrix.shape[0] > 0:
        values[sys.interior] = x
    values[sys.boundary] = sys.dirichlet_values
    return NodalField(values=values, tri=sys.tri)


def energy_product_exact(u: ManufacturedSolution, tri: Triangulation,
                         field: NodalField, degree: int = 2) -> float:
    """a(u, v_h) = integral of grad u . grad v_h, by degree-exact quadrature."""
    bary, wts = quadrature.triangle_rule(degree)
    qpts = quadrature.physical_points(bary, tri.vertices[tri.triangles])
    gu = u.grad_at(qpts)                        # (nt, nq, 2)
    gv = field.element_gradients()              # (nt, 2)
    dots = np.einsum("nqd,nd->nq", gu, gv)
    return float(((dots @ wts) * tri.areas).sum())


def cea_check(u: ManufacturedSolution, tri: Triangulation, U: NodalField,
              candidates: list, rel_slack: float = 1e-9,
              abs_slack: float = 1e-12, degree: int = 2) -> dict:
    """Verify |u - U|_1 <= |u - v|_1 for every candidate v in U's affine space.

    Candidates must carry exactly U's boundary vertex values (the optimality
    property only holds inside one affine space).
    """
    from .analysis import h1_error

    bmask = tri.boundary_vertex_flags
    err_u = h1_error(u, U, tri, degree=degree)
    report = {"err_U": err_u, "candidates": [], "all_ok": True}
    for v in candidates:
        if not np.array_equal(np.asarray(v.values)[bmask],
                              np.asarray(U.values)[bmask]):
            raise BoundaryMismatch("candidate has different boundary values")
        err_v = h1_error(u, v, tri, degree=degree)
        ok = err_u <= err_v * (1.0 + rel_slack) + abs_slack * (1.0 + err_v)
        report["candidates"].append({"err": err_v, "ok": bool(ok)})
        report["all_ok"] = report["all_ok"] and ok
    return report
