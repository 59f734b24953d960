"""Hot per-element kernels: numba fast path with a pure-numpy fallback.

The numba path is used when numba imports successfully, unless the
environment variable ``DEGENFEM_NO_NUMBA`` is set to a truthy value
("1", "true", "yes", "on"), which forces the vectorized numpy fallback.
``BACKEND`` reports the active path.  ``benchmarks/bench_kernels.py``
compares the two.

Kernel contracts (both paths):

- triangle_metrics(xy, tris) ->
      (signed_area, diameter, max_angle, max_angle_vertex, circumradius)
- stiffness_local(xy, tris) -> (nt, 3, 3) exact P1 element matrices
- element_gradients(xy, tris, values) -> (nt, 2) per-element field gradient
- h1_error_terms(areas, grads, grad_u_q, weights) -> (nt,) per-element
      integral of |grad u - grad U|^2 for quadrature weights summing to 1
- bump_eval(points, u_vals, grad_u, centers, radii, kinds, amps, planes)
      -> (w, wx, wy); kind 0 = cubic bump scaled by amplitude, kind 1 =
      plateau bump times (tangent plane - u)
"""
from __future__ import annotations

import math
import os

import numpy as np


def _numba_enabled() -> bool:
    flag = os.environ.get("DEGENFEM_NO_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


_USE_NUMBA = _numba_enabled()
BACKEND = "numba" if _USE_NUMBA else "numpy"


# ----------------------------------------------------------------------
# numpy implementations
# ----------------------------------------------------------------------

def _triangle_metrics_numpy(xy, tris):
    p = xy[tris]  # (nt, 3, 2)
    # edge vector opposite vertex i
    opp = p[:, [2, 0, 1], :] - p[:, [1, 2, 0], :]
    lens = np.hypot(opp[:, :, 0], opp[:, :, 1])
    d01 = p[:, 1] - p[:, 0]
    d02 = p[:, 2] - p[:, 0]
    signed_area = 0.5 * (d01[:, 0] * d02[:, 1] - d01[:, 1] * d02[:, 0])
    # angle at vertex i between the two incident edges
    u = p[:, [1, 2, 0], :] - p
    v = p[:, [2, 0, 1], :] - p
    cross = u[:, :, 0] * v[:, :, 1] - u[:, :, 1] * v[:, :, 0]
    dot = u[:, :, 0] * v[:, :, 0] + u[:, :, 1] * v[:, :, 1]
    ang = np.arctan2(np.abs(cross), dot)
    max_idx = np.argmax(ang, axis=1)
    rows = np.arange(len(tris))
    max_angle = ang[rows, max_idx]
    diameter = lens[rows, max_idx]
    # stable sine of the max angle straight from cross/norms
    sin_max = np.abs(cross[rows, max_idx]) / (
        np.hypot(u[rows, max_idx, 0], u[rows, max_idx, 1])
        * np.hypot(v[rows, max_idx, 0], v[rows, max_idx, 1])
    )
    circumradius = diameter / (2.0 * sin_max)
    return signed_area, diameter, max_angle, max_idx.astype(np.int64), circumradius


def _stiffness_local_numpy(xy, tris):
    p = xy[tris]
    opp = p[:, [2, 0, 1], :] - p[:, [1, 2, 0], :]  # edge opposite vertex i
    d01 = p[:, 1] - p[:, 0]
    d02 = p[:, 2] - p[:, 0]
    area = 0.5 * (d01[:, 0] * d02[:, 1] - d01[:, 1] * d02[:, 0])
    dots = np.einsum("nid,njd->nij", opp, opp)
    return dots / (4.0 * area)[:, None, None]


def _element_gradients_numpy(xy, tris, values):
    p = xy[tris]
    opp = p[:, [2, 0, 1], :] - p[:, [1, 2, 0], :]
    d01 = p[:, 1] - p[:, 0]
    d02 = p[:, 2] - p[:, 0]
    two_area = d01[:, 0] * d02[:, 1] - d01[:, 1] * d02[:, 0]
    vals = values[tris]
    gx = -np.sum(vals * opp[:, :, 1], axis=1) / two_area
    gy = np.sum(vals * opp[:, :, 0], axis=1) / two_area
    return np.stack([gx, gy], axis=1)


def _h1_error_terms_numpy(areas, grads, grad_u_q, weights):
    diff = grad_u_q - grads[:, None, :]
    sq = diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2
    return areas * (sq @ weights)


def _phi_profile_numpy(t):
    tm = t - 1.0
    val = np.where(t < 1.0, 2.0 * tm**3 + 3.0 * tm**2, 0.0)
    dval = np.where(t < 1.0, 6.0 * t * tm, 0.0)
    return val, dval


def _psi_profile_numpy(t):
    tm = t - 2.0
    val = np.where(t <= 1.0, 1.0, np.where(t < 2.0, 2.0 * tm**3 + 3.0 * tm**2, 0.0))
    dval = np.where((t > 1.0) & (t < 2.0), 6.0 * tm * (t - 1.0), 0.0)
    return val, dval


def _bump_eval_numpy(points, u_vals, grad_u, centers, radii, kinds, amps, planes):
    n = len(points)
    w = np.zeros(n)
    wx = np.zeros(n)
    wy = np.zeros(n)
    for b in range(len(centers)):
        dx = points[:, 0] - centers[b, 0]
        dy = points[:, 1] - centers[b, 1]
        dist = np.hypot(dx, dy)
        r = radii[b]
        if kinds[b] == 0:
            mask = dist < r
            if not mask.any():
                continue
            t = dist[mask] / r
            val, dval = _phi_profile_numpy(t)
            w[mask] += amps[b] * val
            safe = dist[mask] > 0.0
            scale = np.zeros_like(t)
            scale[safe] = amps[b] * dval[safe] / (r * dist[mask][safe])
            wx[mask] += scale * dx[mask]
            wy[mask] += scale * dy[mask]
        else:
            mask = dist < 2.0 * r
            if not mask.any():
                continue
            t = dist[mask] / r
            val, dval = _psi_profile_numpy(t)
            v0, gx, gy = planes[b]
            plane = v0 + gx * dx[mask] + gy * dy[mask]
            diff = plane - u_vals[mask]
            w[mask] += diff * val
            safe = dist[mask] > 0.0
            scale = np.zeros_like(t)
            scale[safe] = dval[safe] / (r * dist[mask][safe])
            wx[mask] += (gx - grad_u[mask, 0]) * val + diff * scale * dx[mask]
            wy[mask] += (gy - grad_u[mask, 1]) * val + diff * scale * dy[mask]
    return w, wx, wy


_NUMPY_IMPLS = {
    "triangle_metrics": _triangle_metrics_numpy,
    "stiffness_local": _stiffness_local_numpy,
    "element_gradients": _element_gradients_numpy,
    "h1_error_terms": _h1_error_terms_numpy,
    "bump_eval": _bump_eval_numpy,
}


# ----------------------------------------------------------------------
# numba implementations
# ----------------------------------------------------------------------

_NUMBA_IMPLS = {}

if _USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _triangle_metrics_numba(xy, tris):
        nt = tris.shape[0]
        signed_area = np.empty(nt)
        diameter = np.empty(nt)
        max_angle = np.empty(nt)
        max_idx = np.empty(nt, dtype=np.int64)
        circumradius = np.empty(nt)
        for k in range(nt):
            ax, ay = xy[tris[k, 0], 0], xy[tris[k, 0], 1]
            bx, by = xy[tris[k, 1], 0], xy[tris[k, 1], 1]
            cx, cy = xy[tris[k, 2], 0], xy[tris[k, 2], 1]
            signed_area[k] = 0.5 * ((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))
            best = -1.0
            besti = 0
            best_sin = 0.0
            best_len = 0.0
            for i in range(3):
                px = xy[tris[k, i], 0]
                py = xy[tris[k, i], 1]
                qx = xy[tris[k, (i + 1) % 3], 0]
                qy = xy[tris[k, (i + 1) % 3], 1]
                rx = xy[tris[k, (i + 2) % 3], 0]
                ry = xy[tris[k, (i + 2) % 3], 1]
                ux, uy = qx - px, qy - py
                vx, vy = rx - px, ry - py
                cr = ux * vy - uy * vx
                dt = ux * vx + uy * vy
                ang = math.atan2(abs(cr), dt)
                if ang > best:
                    best = ang
                    besti = i
                    nu = math.hypot(ux, uy)
                    nv = math.hypot(vx, vy)
                    best_sin = abs(cr) / (nu * nv)
                    best_len = math.hypot(rx - qx, ry - qy)
            max_angle[k] = best
            max_idx[k] = besti
            diameter[k] = best_len
            circumradius[k] = best_len / (2.0 * best_sin)
        return signed_area, diameter, max_angle, max_idx, circumradius

    @njit(cache=True)
    def _stiffness_local_numba(xy, tris):
        nt = tris.shape[0]
        out = np.empty((nt, 3, 3))
        ox = np.empty(3)
        oy = np.empty(3)
        for k in range(nt):
            for i in range(3):
                j1 = tris[k, (i + 1) % 3]
                j2 = tris[k, (i + 2) % 3]
                ox[i] = xy[j2, 0] - xy[j1, 0]
                oy[i] = xy[j2, 1] - xy[j1, 1]
            area = 0.5 * (ox[2] * (-oy[1]) - oy[2] * (-ox[1]))
            c = 0.25 / area
            for i in range(3):
                for j in range(3):
                    out[k, i, j] = c * (ox[i] * ox[j] + oy[i] * oy[j])
        return out

    @njit(cache=True)
    def _element_gradients_numba(xy, tris, values):
        nt = tris.shape[0]
        out = np.empty((nt, 2))
        for k in range(nt):
            i0, i1, i2 = tris[k, 0], tris[k, 1], tris[k, 2]
            x0, y0 = xy[i0, 0], xy[i0, 1]
            x1, y1 = xy[i1, 0], xy[i1, 1]
            x2, y2 = xy[i2, 0], xy[i2, 1]
            two_area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
            v0, v1, v2 = values[i0], values[i1], values[i2]
            gx = -(v0 * (y2 - y1) + v1 * (y0 - y2) + v2 * (y1 - y0)) / two_area
            gy = (v0 * (x2 - x1) + v1 * (x0 - x2) + v2 * (x1 - x0)) / two_area
            out[k, 0] = gx
            out[k, 1] = gy
        return out

    @njit(cache=True)
    def _h1_error_terms_numba(areas, grads, grad_u_q, weights):
        nt = areas.shape[0]
        nq = weights.shape[0]
        out = np.empty(nt)
        for k in range(nt):
            acc = 0.0
            for q in range(nq):
                ex = grad_u_q[k, q, 0] - grads[k, 0]
                ey = grad_u_q[k, q, 1] - grads[k, 1]
                acc += weights[q] * (ex * ex + ey * ey)
            out[k] = areas[k] * acc
        return out

    @njit(cache=True)
    def _bump_eval_numba(points, u_vals, grad_u, centers, radii, kinds, amps, planes):
        n = points.shape[0]
        nb = centers.shape[0]
        w = np.zeros(n)
        wx = np.zeros(n)
        wy = np.zeros(n)
        for b in range(nb):
            cx, cy = centers[b, 0], centers[b, 1]
            r = radii[b]
            outer = r if kinds[b] == 0 else 2.0 * r
            for i in range(n):
                dx = points[i, 0] - cx
                dy = points[i, 1] - cy
                dist = math.hypot(dx, dy)
                if dist >= outer:
                    continue
                t = dist / r
                if kinds[b] == 0:
                    tm = t - 1.0
                    val = 2.0 * tm * tm * tm + 3.0 * tm * tm
                    dval = 6.0 * t * tm
                    w[i] += amps[b] * val
                    if dist > 0.0:
                        s = amps[b] * dval / (r * dist)
                        wx[i] += s * dx
                        wy[i] += s * dy
                else:
                    if t <= 1.0:
                        val = 1.0
                        dval = 0.0
                    else:
                        tm = t - 2.0
                        val = 2.0 * tm * tm * tm + 3.0 * tm * tm
                        dval = 6.0 * tm * (t - 1.0)
                    v0, gx, gy = planes[b, 0], planes[b, 1], planes[b, 2]
                    plane = v0 + gx * dx + gy * dy
                    diff = plane - u_vals[i]
                    w[i] += diff * val
                    wx[i] += (gx - grad_u[i, 0]) * val
                    wy[i] += (gy - grad_u[i, 1]) * val
                    if dist > 0.0:
                        s = dval / (r * dist)
                        wx[i] += diff * s * dx
                        wy[i] += diff * s * dy
        return w, wx, wy

    _NUMBA_IMPLS = {
        "triangle_metrics": _triangle_metrics_numba,
        "stiffness_local": _stiffness_local_numba,
        "element_gradients": _element_gradients_numba,
        "h1_error_terms": _h1_error_terms_numba,
        "bump_eval": _bump_eval_numba,
    }


_ACTIVE = _NUMBA_IMPLS if _USE_NUMBA else _NUMPY_IMPLS

triangle_metrics = _ACTIVE["triangle_metrics"]
stiffness_local = _ACTIVE["stiffness_local"]
element_gradients = _ACTIVE["element_gradients"]
h1_error_terms = _ACTIVE["h1_error_terms"]
bump_eval = _ACTIVE["bump_eval"]


def implementations():
    """Both kernel tables, for benchmarking and cross-checking paths."""
    return {"numpy": _NUMPY_IMPLS, "numba": _NUMBA_IMPLS if _USE_NUMBA else None}


def warmup():
    """Trigger JIT compilation on tiny inputs so later timings are clean."""
    xy = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    tris = np.array([[0, 1, 2], [1, 3, 2]], dtype=np.int64)
    vals = np.array([0.0, 1.0, 1.0, 2.0])
    triangle_metrics(xy, tris)
    stiffness_local(xy, tris)
    g = element_gradients(xy, tris, vals)
    h1_error_terms(
        np.array([0.5, 0.5]), g, np.zeros((2, 3, 2)), np.full(3, 1.0 / 3.0)
    )
    bump_eval(
        xy,
        vals,
        np.zeros((4, 2)),
        np.array([[0.0, 0.0], [1.0, 1.0]]),
        np.array([0.5, 0.25]),
        np.array([0, 1], dtype=np.int64),
        np.array([1.0, 0.0]),
        np.array([[0.0, 0.0, 0.0], [1.0, 0.5, 0.5]]),
    )
