"""Interpolation operators: nodal Lagrange, the modified variant for
degenerate elements, compactly supported correction bumps, and the corrected
global interpolant.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, quadrature
from .errors import (
    InadmissibleCorrection,
    InconsistentClassification,
    NonpositiveRadius,
)
from .geometry import TriangleGeom, altitude_frame
from .mesh import MeshClassification, Triangulation


@dataclass
class ManufacturedSolution:
    """Analytic test solution: u, its gradient, f = -laplacian(u) and the
    max-norm of the second derivatives (plus the H2 seminorm when known).

    Evaluators take coordinate arrays (x, y) and broadcast.
    """

    eval_u: callable
    eval_grad: callable
    eval_f: callable
    seminorm_2inf: float
    seminorm_2: float | None = None
    name: str = ""

    def u_at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.eval_u(points[..., 0], points[..., 1])

    def grad_at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        gx, gy = self.eval_grad(points[..., 0], points[..., 1])
        return np.stack(np.broadcast_arrays(gx, gy), axis=-1)

    def f_at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.broadcast_to(
            np.asarray(self.eval_f(points[..., 0], points[..., 1]), dtype=float),
            points.shape[:-1],
        )


def quadratic_solution() -> ManufacturedSolution:
    """u = x^2 + y^2, f = -4; the canonical quadratic test solution."""
    return ManufacturedSolution(
        eval_u=lambda x, y: x**2 + y**2,
        eval_grad=lambda x, y: (2.0 * x, 2.0 * y),
        eval_f=lambda x, y: np.full(np.broadcast(x, y).shape, -4.0),
        seminorm_2inf=2.0,
        seminorm_2=2.0 * math.sqrt(2.0),
        name="quadratic",
    )


def sine_solution() -> ManufacturedSolution:
    """u = sin(pi x) sin(pi y); smooth non-polynomial alternative."""
    pi = math.pi
    return ManufacturedSolution(
        eval_u=lambda x, y: np.sin(pi * x) * np.sin(pi * y),
        eval_grad=lambda x, y: (pi * np.cos(pi * x) * np.sin(pi * y),
                                pi * np.sin(pi * x) * np.cos(pi * y)),
        eval_f=lambda x, y: 2.0 * pi**2 * np.sin(pi * x) * np.sin(pi * y),
        seminorm_2inf=pi**2,
        seminorm_2=pi**2,
        name="sine",
    )


def linear_solution(a: float, b: float, c: float) -> ManufacturedSolution:
    """u = a + b x + c y; reproduced exactly by every P1 operator."""
    return ManufacturedSolution(
        eval_u=lambda x, y: a + b * x + c * y,
        eval_grad=lambda x, y: (np.full(np.broadcast(x, y).shape, b),
                                np.full(np.broadcast(x, y).shape, c)),
        eval_f=lambda x, y: np.zeros(np.broadcast(x, y).shape),
        seminorm_2inf=0.0,
        seminorm_2=0.0,
        name="linear",
    )


SOLUTIONS = {"quadratic": quadratic_solution, "sine": sine_solution}


@dataclass
class NodalField:
    """Continuous piecewise-linear function given by one value per vertex."""

    values: np.ndarray
    tri: Triangulation

    def __post_init__(self):
        if len(self.values) != self.tri.n_vertices:
            raise ValueError("one value per vertex required")

    def element_gradients(self, ids=None) -> np.ndarray:
        grads = kernels.element_gradients(
            self.tri.vertices, self.tri.triangles, np.ascontiguousarray(self.values)
        )
        return grads if ids is None else grads[np.asarray(ids)]


# ----------------------------------------------------------------------
# bump functions
# ----------------------------------------------------------------------

def bump_phi(r: float, points) -> tuple[np.ndarray, np.ndarray]:
    """Cubic bump of radius r centered at the origin: value 1 and zero slope
    at the center, C1-flat at |x| = r, zero outside.

    Returns (values, gradients) for (..., 2) point arrays.
    """
    if r <= 0:
        raise NonpositiveRadius("bump radius must be positive")
    pts = np.asarray(points, dtype=float)
    d = np.hypot(pts[..., 0], pts[..., 1])
    t = d / r
    tm = t - 1.0
    inside = t < 1.0
    val = np.where(inside, 2.0 * tm**3 + 3.0 * tm**2, 0.0)
    dval = np.where(inside, 6.0 * t * tm, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(d > 0.0, dval / (r * d), 0.0)
    grad = scale[..., None] * pts
    return val, grad


def bump_psi(r: float, points) -> tuple[np.ndarray, np.ndarray]:
    """Plateau ('table mountain') bump: 1 on |x| <= r, cubic blend down to 0
    at |x| = 2r, C1 everywhere."""
    if r <= 0:
        raise NonpositiveRadius("bump radius must be positive")
    pts = np.asarray(points, dtype=float)
    d = np.hypot(pts[..., 0], pts[..., 1])
    t = d / r
    tm = t - 2.0
    val = np.where(t <= 1.0, 1.0, np.where(t < 2.0, 2.0 * tm**3 + 3.0 * tm**2, 0.0))
    dval = np.where((t > 1.0) & (t < 2.0), 6.0 * tm * (t - 1.0), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(d > 0.0, dval / (r * d), 0.0)
    grad = scale[..., None] * pts
    return val, grad


# ----------------------------------------------------------------------
# interpolation operators
# ----------------------------------------------------------------------

def lagrange(u: ManufacturedSolution, tri: Triangulation) -> NodalField:
    """Nodal interpolant: field value = u at every vertex."""
    return NodalField(values=u.u_at(tri.vertices), tri=tri)


def modified_element_interp(u: ManufacturedSolution, g: TriangleGeom):
    """Element interpolant that drops the apex interpolation condition.

    The linear function v matches u at the two base vertices and matches the
    normal derivative of u at the altitude foot.  Returns the values of v at
    (apex, base1, base2) and delta = v(apex) - u(apex).
    """
    a = g.apex
    b, c = g.base_vertices
    x_k, v1, v2 = altitude_frame(g)
    ub = float(u.u_at(b))
    uc = float(u.u_at(c))
    slope = (uc - ub) / np.hypot(*(c - b))
    d = float(u.grad_at(x_k) @ v2)
    ab = a - b
    va = ub + slope * float(ab @ v1) + d * float(ab @ v2)
    delta = va - float(u.u_at(a))
    return (va, ub, uc), delta


@dataclass
class TangentPlane:
    """Linear function v(x) = value + gradient . (x - anchor)."""

    value: float
    gradient: np.ndarray
    anchor: np.ndarray

    def at(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.value + (pts[..., 0] - self.anchor[0]) * self.gradient[0] \
            + (pts[..., 1] - self.anchor[1]) * self.gradient[1]


def tangent_plane(u: ManufacturedSolution, x_c) -> TangentPlane:
    """First-order Taylor polynomial of u at x_c."""
    x_c = np.asarray(x_c, dtype=float)
    return TangentPlane(
        value=float(u.u_at(x_c)),
        gradient=u.grad_at(x_c).astype(float),
        anchor=x_c,
    )


# ----------------------------------------------------------------------
# correction functions
# ----------------------------------------------------------------------

@dataclass
class Bump:
    center: np.ndarray
    radius: float
    kind: str                      # "phi" | "psi"
    amplitude: float = 0.0         # phi kind
    plane: TangentPlane | None = None  # psi kind
    element: int | None = None
    cluster: int | None = None

    @property
    def outer_radius(self) -> float:
        return self.radius if self.kind == "phi" else 2.0 * self.radius


@dataclass
class CorrectionSpec:
    """Bump terms defining the correction function w, plus the admissibility
    verdict and any recorded violations."""

    bumps: list
    admissible: bool
    violations: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def bump_dict(b: Bump) -> dict:
            d = {
                "center": [float(b.center[0]), float(b.center[1])],
                "radius": b.radius,
                "kind": b.kind,
            }
            if b.kind == "phi":
                d["amplitude"] = b.amplitude
                d["element"] = b.element
            else:
                d["plane"] = {
                    "value": b.plane.value,
                    "gradient": [float(g) for g in b.plane.gradient],
                    "anchor": [float(a) for a in b.plane.anchor],
                }
                d["cluster"] = b.cluster
            return d

        return json.dumps({
            "bumps": [bump_dict(b) for b in self.bumps],
            "admissible": self.admissible,
            "violations": self.violations,
            "stats": self.stats,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CorrectionSpec":
        raw = json.loads(text)
        bumps = []
        for d in raw["bumps"]:
            if d["kind"] == "phi":
                bumps.append(Bump(
                    center=np.asarray(d["center"]), radius=d["radius"],
                    kind="phi", amplitude=d["amplitude"], element=d.get("element"),
                ))
            else:
                p = d["plane"]
                bumps.append(Bump(
                    center=np.asarray(d["center"]), radius=d["radius"], kind="psi",
                    plane=TangentPlane(p["value"], np.asarray(p["gradient"]),
                                       np.asarray(p["anchor"])),
                    cluster=d.get("cluster"),
                ))
        return cls(bumps=bumps, admissible=raw["admissible"],
                   violations=raw["violations"], stats=raw.get("stats", {}))


def _bump_arrays(bumps: list):
    nb = len(bumps)
    centers = np.zeros((nb, 2))
    radii = np.zeros(nb)
    kinds = np.zeros(nb, dtype=np.int64)
    amps = np.zeros(nb)
    planes = np.zeros((nb, 3))
    for i, b in enumerate(bumps):
        centers[i] = b.center
        radii[i] = b.radius
        if b.kind == "phi":
            amps[i] = b.amplitude
        else:
            kinds[i] = 1
            planes[i] = (b.plane.value, b.plane.gradient[0], b.plane.gradient[1])
    return centers, radii, kinds, amps, planes


def evaluate_correction(spec: CorrectionSpec, u: ManufacturedSolution, points):
    """Values and gradients of w = sum of bumps at the given points."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    if not spec.bumps:
        return np.zeros(len(pts)), np.zeros((len(pts), 2))
    u_vals = np.ascontiguousarray(u.u_at(pts))
    gu = np.ascontiguousarray(u.grad_at(pts))
    w, wx, wy = kernels.bump_eval(pts, u_vals, gu, *_bump_arrays(spec.bumps))
    return w, np.stack([wx, wy], axis=1)


def build_correction(u: ManufacturedSolution, tri: Triangulation,
                     classification: MeshClassification, clusters=None,
                     sum_h2_budget: float | None = None,
                     cluster_diam_coef: float = 2.0) -> CorrectionSpec:
    """Construct the correction bumps for the degenerate elements and record
    the admissibility checks.

    Isolated degenerate elements get a cubic bump at their apex with radius
    half the shorter apex edge and amplitude equal to the modified
    interpolant's apex perturbation.  Each cluster gets one plateau bump
    around the tangent plane at the centroid of its bounding box.  Violations
    are reported in the spec, not raised.
    """
    t1 = np.asarray(classification.t1)
    t2 = np.asarray(classification.t2)
    if len(t1) + len(t2) != tri.n_triangles or \
            len(np.intersect1d(t1, t2)) > 0:
        raise InconsistentClassification("t1/t2 must partition the elements")

    clusters = [np.asarray(c, dtype=np.int64) for c in (clusters or [])]
    for c in clusters:
        if len(c) and (c.min() < 0 or c.max() >= tri.n_triangles):
            raise InconsistentClassification("cluster references unknown elements")
    clustered = np.unique(np.concatenate(clusters)) if clusters else \
        np.empty(0, dtype=np.int64)
    isolated = np.setdiff1d(t2, clustered)

    bumps = []
    for k in isolated:
        g = tri.element_geom(int(k))
        a = g.apex
        b, c = g.base_vertices
        r = 0.5 * min(np.hypot(*(a - b)), np.hypot(*(a - c)))
        _, delta = modified_element_interp(u, g)
        bumps.append(Bump(center=a.copy(), radius=float(r), kind="phi",
                          amplitude=float(delta), element=int(k)))
    for ci, c in enumerate(clusters):
        cverts = np.unique(tri.triangles[c].ravel())
        cxy = tri.vertices[cverts]
        lo = cxy.min(axis=0)
        hi = cxy.max(axis=0)
        center = 0.5 * (lo + hi)
        d2 = ((cxy[:, None, :] - cxy[None, :, :]) ** 2).sum(axis=2)
        diam = float(np.sqrt(d2.max()))
        bumps.append(Bump(center=center, radius=diam, kind="psi",
                          plane=tangent_plane(u, center), cluster=ci))

    violations = []
    stats = {}

    # (a) pairwise support disjointness (equivalently the apex separation
    # condition for two cubic bumps)
    for i in range(len(bumps)):
        for j in range(i + 1, len(bumps)):
            dist = float(np.hypot(*(bumps[i].center - bumps[j].center)))
            need = bumps[i].outer_radius + bumps[j].outer_radius
            if dist < need:
                violations.append({
                    "check": "a_support_disjoint", "bumps": [i, j],
                    "distance": dist, "required": need,
                })

    # (b) no base vertex of another degenerate element inside a cubic support
    t2_set = set(int(v) for v in t2)
    base_pts = []
    for k in t2:
        g = tri.element_geom(int(k))
        b, c = g.base_vertices
        base_pts.append((int(k), b))
        base_pts.append((int(k), c))
    for i, bump in enumerate(bumps):
        if bump.kind != "phi":
            continue
        for k, p in base_pts:
            if k == bump.element:
                continue
            dist = float(np.hypot(*(bump.center - p)))
            if dist < bump.radius:
                violations.append({
                    "check": "b_foreign_vertex", "bump": i, "element": k,
                    "distance": dist, "required": bump.radius,
                })

    # (c) sum of squared diameters over the degenerate set
    area = (tri.bbox[1] - tri.bbox[0]) * (tri.bbox[3] - tri.bbox[2])
    budget = 4.0 * area if sum_h2_budget is None else sum_h2_budget
    sum_h2 = float((tri.diameters[t2] ** 2).sum()) if len(t2) else 0.0
    stats["sum_h2"] = sum_h2
    stats["sum_h2_budget"] = budget
    if sum_h2 > budget:
        violations.append({"check": "c_h2_budget", "value": sum_h2,
                           "budget": budget})

    # (d) cluster diameter vs the mesh-size square root
    sqrt_h = math.sqrt(tri.mesh_size_h)
    for i, bump in enumerate(bumps):
        if bump.kind != "psi":
            continue
        ratio = bump.radius / sqrt_h
        stats.setdefault("cluster_diam_ratios", []).append(ratio)
        if bump.radius > cluster_diam_coef * sqrt_h:
            violations.append({
                "check": "d_cluster_diameter", "bump": i,
                "diameter": bump.radius,
                "allowed": cluster_diam_coef * sqrt_h,
            })

    # (e) separation between cluster element sets
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            pi = tri.vertices[np.unique(tri.triangles[clusters[i]].ravel())]
            pj = tri.vertices[np.unique(tri.triangles[clusters[j]].ravel())]
            d2 = ((pi[:, None, :] - pj[None, :, :]) ** 2).sum(axis=2)
            dist = float(np.sqrt(d2.min()))
            need = 2.0 * (bumps_psi_radius(bumps, i) + bumps_psi_radius(bumps, j))
            if dist < need:
                violations.append({
                    "check": "e_cluster_separation", "clusters": [i, j],
                    "distance": dist, "required": need,
                })

    return CorrectionSpec(bumps=bumps, admissible=not violations,
                          violations=violations, stats=stats)


def bumps_psi_radius(bumps: list, cluster_index: int) -> float:
    for b in bumps:
        if b.kind == "psi" and b.cluster == cluster_index:
            return b.radius
    raise KeyError(f"no plateau bump for cluster {cluster_index}")


def corrected_interpolant(u: ManufacturedSolution, tri: Triangulation,
                          spec: CorrectionSpec) -> NodalField:
    """Nodal interpolant of u + w; equals plain Lagrange outside the bump
    supports and realizes the modified element interpolants on the
    degenerate elements."""
    if not spec.admissible:
        raise InadmissibleCorrection(
            f"{len(spec.violations)} admissibility violations"
        )
    w, _ = evaluate_correction(spec, u, tri.vertices)
    return NodalField(values=u.u_at(tri.vertices) + w, tri=tri)


def correction_h1_seminorm(spec: CorrectionSpec, u: ManufacturedSolution,
                           tri: Triangulation, elements=None,
                           degree: int = 5) -> float:
    """H1 seminorm of w over the given elements (default: all), by quadrature.

    Only elements whose vertices touch a bump support can contribute; the
    rest are skipped.
    """
    if not spec.bumps:
        return 0.0
    ids = np.arange(tri.n_triangles) if elements is None else \
        np.asarray(elements, dtype=np.int64)
    centers = np.array([b.center for b in spec.bumps])
    outer = np.array([b.outer_radius for b in spec.bumps])
    p = tri.vertices[tri.triangles[ids]]  # (n, 3, 2)
    keep = np.zeros(len(ids), dtype=bool)
    for c, r in zip(centers, outer):
        d = np.hypot(p[:, :, 0] - c[0], p[:, :, 1] - c[1])
        keep |= (d < r + tri.diameters[ids][:, None]).any(axis=1)
    ids = ids[keep]
    if len(ids) == 0:
        return 0.0
    bary, wts = quadrature.triangle_rule(degree)
    qpts = quadrature.physical_points(bary, tri.vertices[tri.triangles[ids]])
    _, grads = evaluate_correction(spec, u, qpts.reshape(-1, 2))
    sq = (grads**2).sum(axis=1).reshape(len(ids), len(bary))
    return float(np.sqrt(((sq @ wts) * tri.areas[ids]).sum()))
