"""Error measurement and band machinery: trace slopes, the two-part error
split on a band, lower-bound quantities for the band length restriction,
difference-inequality oracle, and the sufficient-condition report.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, quadrature
from .errors import BandInconsistent, InvalidConfiguration
from .geometry import sin_angle_at
from .interp import CorrectionSpec, ManufacturedSolution, NodalField
from .mesh import MeshClassification, Triangulation
from .meshgen import Band, validate_band


def h1_error(u: ManufacturedSolution, field: NodalField, tri: Triangulation,
             subset=None, degree: int = 2) -> float:
    """H1-seminorm error (sum_K int_K |grad u - grad U|^2)^(1/2).

    The degree-2 rule is exact for quadratic u; pass degree=5 for general u.
    """
    ids = np.arange(tri.n_triangles) if subset is None else \
        np.asarray(subset, dtype=np.int64)
    if len(ids) == 0:
        return 0.0
    bary, wts = quadrature.triangle_rule(degree)
    verts = tri.vertices[tri.triangles[ids]]
    qpts = quadrature.physical_points(bary, verts)
    gu = np.ascontiguousarray(u.grad_at(qpts))
    grads = field.element_gradients()[ids]
    terms = kernels.h1_error_terms(
        np.ascontiguousarray(tri.areas[ids]), np.ascontiguousarray(grads),
        gu, np.ascontiguousarray(wts))
    return float(np.sqrt(terms.sum()))


def l2_boundary_error(u: ManufacturedSolution, field: NodalField,
                      gamma_edges, tri: Triangulation) -> float:
    """L2 error of the field trace along the given mesh edges."""
    edges = np.asarray(gamma_edges, dtype=np.int64).reshape(-1, 2)
    for a, b in edges:
        if tri.edge_id(int(a), int(b)) < 0:
            raise ValueError(f"({a},{b}) is not a mesh edge")
    pa = tri.vertices[edges[:, 0]]
    pb = tri.vertices[edges[:, 1]]
    lens = np.hypot(*(pb - pa).T)
    va = field.values[edges[:, 0]]
    vb = field.values[edges[:, 1]]
    total = 0.0
    for t, w in zip(quadrature.GAUSS3_NODES, quadrature.GAUSS3_WEIGHTS):
        pts = pa + t * (pb - pa)
        diff = u.u_at(pts) - (va + t * (vb - va))
        total += float((w * lens * diff**2).sum())
    return math.sqrt(total)


def proj_p1_residual(length: float, quad_coeff: float = 1.0) -> float:
    """L2(0, L) distance from c*t^2 + linear to its best linear approximation.

    Closed form |c| L^(5/2) / (6 sqrt 5); linear parts project away exactly.
    """
    if length <= 0:
        raise ValueError("interval length must be positive")
    return abs(quad_coeff) * length**2.5 / (6.0 * math.sqrt(5.0))


@dataclass
class BandTrace:
    """Directional derivatives of a field along a band line.

    wprime subtracts the secant slope of the trace, so sum(h_i * wprime_i)
    telescopes to zero.
    """

    interval_lengths: np.ndarray
    slopes: np.ndarray
    wprime: np.ndarray
    secant_slope: float


def band_trace(field: NodalField, band: Band, tri: Triangulation) -> BandTrace:
    validate_band(band, tri, require_alternating=False)
    g = np.asarray(band.direction_g, dtype=float)
    edges = np.asarray(band.gamma_edges).reshape(-1, 2)
    pa = tri.vertices[edges[:, 0]]
    pb = tri.vertices[edges[:, 1]]
    h = np.hypot(*(pb - pa).T)
    slopes = field.element_gradients(band.odd_elements) @ g
    v0 = float(field.values[edges[0, 0]])
    v1 = float(field.values[edges[-1, 1]])
    length = float(h.sum())
    secant = (v1 - v0) / length
    wprime = slopes - secant
    resid = abs(float((h * wprime).sum()))
    scale = max(float(np.abs(wprime).max(initial=0.0)), 1e-300) * max(length, 1.0)
    if resid > 1e-10 * scale:
        raise BandInconsistent(
            f"trace increments do not telescope: residual {resid:.3e}"
        )
    return BandTrace(interval_lengths=h, slopes=slopes, wprime=wprime,
                     secant_slope=secant)


def difference_bound_oracle(h, a):
    """Check sum (a_i - a_{i-1})^2 >= (sum h a^2) / (L N) after mean-shifting a.

    Returns (lhs, rhs); raises AssertionError if the inequality fails beyond
    roundoff.
    """
    h = np.asarray(h, dtype=float)
    a = np.asarray(a, dtype=float)
    if (h <= 0).any():
        raise ValueError("interval lengths must be positive")
    if len(h) != len(a) or len(h) < 2:
        raise ValueError("need equally many h and a, at least two")
    length = float(h.sum())
    a = a - float((h * a).sum()) / length
    big_a = float((h * a * a).sum())
    n = len(h) - 1
    lhs = float((np.diff(a) ** 2).sum())
    rhs = big_a / (length * n)
    if lhs < rhs * (1.0 - 1e-12):
        raise AssertionError(f"difference bound violated: {lhs} < {rhs}")
    return lhs, rhs


@dataclass
class BandErrorSplit:
    """Split of the H1 error on the inverted band elements: the geometric
    lower-bound part a1 and the remainder a2 (their sum is the error)."""

    a1: float
    a2: float
    h1_error_on_tilde: float


def band_split(u: ManufacturedSolution, field: NodalField, band: Band,
               tri: Triangulation) -> BandErrorSplit:
    validate_band(band, tri, require_alternating=False)
    if len(band.even_elements) == 0:
        raise BandInconsistent("band has no inverted elements")
    g = np.asarray(band.direction_g, dtype=float)
    slopes = field.element_gradients(band.odd_elements) @ g
    diffs = np.diff(slopes)
    sins = tri.sin_max_angles(band.even_elements)
    areas = tri.areas[band.even_elements]
    a1 = float(np.sqrt((areas * diffs**2 / sins**2).sum()))
    err = h1_error(u, field, tri, subset=band.even_elements)
    return BandErrorSplit(a1=a1, a2=err - a1, h1_error_on_tilde=err)


def necessary_condition_report(bands: list, tri: Triangulation,
                               alpha: float = 1.0, c_l: float = 1.0) -> dict:
    """Lower-bound quantities that any field obeying an O(h^alpha) error
    bound must keep small, per band and aggregated over all bands.

    For each band: min_i 1/sin(pi - max angle of the inverted elements) *
    min_i |K_i|^(1/2) * L / sqrt(N).  The closed forms for bands of identical
    isosceles elements (h^2 hbar^(-1/2) L^(1/2) / (4 sqrt 2) per band,
    h^2 hbar^(-1) L / (4 sqrt 2) for a full multi-band tiling) are reported
    alongside.  Both sides of every inequality are reported; no verdict is
    emitted at a guessed constant.
    """
    h = tri.mesh_size_h
    per_band = []
    agg_sq = 0.0
    for band in bands:
        validate_band(band, tri, require_alternating=False)
        if len(band.even_elements) == 0:
            continue
        sins = tri.sin_max_angles(band.even_elements)
        areas = tri.areas[band.even_elements]
        n = len(band.even_elements)
        inv_sin = float(1.0 / sins.max())
        min_area = float(areas.min())
        length = band.length_L
        value = inv_sin * math.sqrt(min_area) * length / math.sqrt(n)
        closed = None
        if band.base_h and band.height_hbar:
            closed = (band.base_h**2 / math.sqrt(band.height_hbar)
                      * math.sqrt(length) / (4.0 * math.sqrt(2.0)))
        # measured constants of the lower-bound theorem's assumptions: how
        # large the inverted elements are relative to their neighbors, and
        # how the neighbor sines compare; thresholds are left to the caller
        odd_areas = tri.areas[band.odd_elements]
        odd_sins = tri.sin_max_angles(band.odd_elements)
        neighbor_min_area = np.minimum(odd_areas[:-1], odd_areas[1:])
        per_band.append({
            "value": value,
            "closed_form": closed,
            "n_elements": n,
            "length": length,
            "min_inv_sin": inv_sin,
            "min_tilde_area": min_area,
            "min_length_required": c_l * h ** (2.0 * alpha / 5.0),
            "max_area_ratio": float((areas / neighbor_min_area).max()),
            "max_sin_ratio": float((odd_sins[:-1] / sins).max()),
        })
        agg_sq += inv_sin**2 * min_area * length**2 / n
    report = {"per_band": per_band, "aggregate": math.sqrt(agg_sq),
              "alpha": alpha, "c_l": c_l, "h": h}
    if bands and all(b.base_h and b.height_hbar for b in bands):
        b0 = bands[0]
        report["aggregate_closed_form"] = (
            b0.base_h**2 / b0.height_hbar * b0.length_L / (4.0 * math.sqrt(2.0))
        )
    return report


def sufficient_check(tri: Triangulation, classification: MeshClassification,
                     spec: CorrectionSpec, clusters=None) -> dict:
    """Structured report of the correction admissibility conditions.

    Echoes the spec's violations with measured worst offenders plus the
    maximum angle over the regular part.
    """
    t1 = np.asarray(classification.t1)
    report = {
        "alpha0": classification.alpha0,
        "n_t1": int(len(t1)),
        "n_t2": int(len(classification.t2)),
        "max_angle_t1": float(tri.max_angles[t1].max()) if len(t1) else 0.0,
        "sum_h2": spec.stats.get("sum_h2", 0.0),
        "sum_h2_budget": spec.stats.get("sum_h2_budget"),
        "cluster_diam_ratios": spec.stats.get("cluster_diam_ratios", []),
        "n_clusters": len(clusters) if clusters else 0,
        "violations": spec.violations,
        "verdict": "pass" if spec.admissible else "fail",
    }
    by_check: dict[str, int] = {}
    for v in spec.violations:
        by_check[v["check"]] = by_check.get(v["check"], 0) + 1
    report["violations_by_check"] = by_check
    return report


@dataclass
class LinearFunction:
    """v(x) = value_at_anchor + gradient . (x - anchor)."""

    gradient: np.ndarray
    anchor: np.ndarray
    value_at_anchor: float

    def at(self, p) -> float:
        p = np.asarray(p, dtype=float)
        return self.value_at_anchor + float(self.gradient @ (p - self.anchor))


def _gradient_from_values(p0, p1, p2, v0, v1, v2) -> np.ndarray:
    two_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
    gx = -(v0 * (p2[1] - p1[1]) + v1 * (p0[1] - p2[1]) + v2 * (p1[1] - p0[1]))
    gy = v0 * (p2[0] - p1[0]) + v1 * (p0[0] - p2[0]) + v2 * (p1[0] - p0[0])
    return np.array([gx, gy]) / two_area


def three_element_identity_check(b0, b1, b2, t0, t1,
                                 u0: LinearFunction, u1: LinearFunction,
                                 tol: float = 1e-10):
    """Gradient identity on the triplet (b0,b1,t0), (t0,t1,b1), (b1,b2,t1).

    Given linear functions U0 on the first and U1 on the last element that
    agree at the shared vertex b1, the middle element's linear function is
    forced by continuity; its gradient deviation from U1 equals the
    projection of grad(U0 - U1) onto the shared edge direction divided by
    the sine of the middle element's angle at b1.  Returns (lhs, rhs) and
    asserts their agreement.
    """
    b0, b1, b2, t0, t1 = (np.asarray(p, dtype=float) for p in (b0, b1, b2, t0, t1))
    if abs(u0.at(b1) - u1.at(b1)) > 1e-12 * (1.0 + abs(u0.at(b1))):
        raise InvalidConfiguration("U0 and U1 must agree at the shared vertex")
    for tri_pts in ((b0, b1, t0), (t0, t1, b1), (b1, b2, t1)):
        d01 = tri_pts[1] - tri_pts[0]
        d02 = tri_pts[2] - tri_pts[0]
        if d01[0] * d02[1] - d01[1] * d02[0] == 0.0:
            raise InvalidConfiguration("degenerate element in the triplet")

    # continuity forces the middle function's vertex values
    g_tilde = _gradient_from_values(t0, t1, b1, u0.at(t0), u1.at(t1), u1.at(b1))
    lhs = float(np.hypot(*(g_tilde - u1.gradient)))

    v = t0 - b1
    v_hat = v / np.hypot(*v)
    sin_b1 = sin_angle_at(b1, t0, t1)
    dgrad = u0.gradient - u1.gradient
    rhs = abs(float(v_hat @ dgrad)) / sin_b1

    err = abs(lhs - rhs)
    scale = lhs + rhs + float(np.hypot(*u0.gradient)) + \
        float(np.hypot(*u1.gradient)) + 1.0
    if err > tol * scale:
        raise AssertionError(
            f"identity violated: lhs={lhs!r} rhs={rhs!r} err={err:.3e}"
        )
    return lhs, rhs


def fit_rate(hs, errors):
    """Least-squares slope of log(error) against log(h), with fit residual."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if (errors <= 0).any():
        raise ValueError("errors must be positive for a log-log fit")
    coef, res, *_ = np.polyfit(np.log(hs), np.log(errors), 1, full=True)
    residual = float(res[0]) if len(res) else 0.0
    return float(coef[0]), residual
