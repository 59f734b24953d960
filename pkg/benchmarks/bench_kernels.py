"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--nx 64] [--ny 512] [--repeat 5]

Builds one Babuska-Aziz mesh, times every kernel on both paths and checks
that the results agree.  Run with DEGENFEM_NO_NUMBA=1 to confirm the package
itself works on the fallback path end to end.
"""
import argparse
import time

import numpy as np

from degenfem import kernels, meshgen
from degenfem.interp import quadratic_solution
from degenfem.quadrature import MIDPOINT_BARY, MIDPOINT_WEIGHTS, physical_points


def time_call(fn, *args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=64)
    ap.add_argument("--ny", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--bumps", type=int, default=64)
    ap.add_argument("--points", type=int, default=200_000)
    args = ap.parse_args()

    impls = kernels.implementations()
    if impls["numba"] is None:
        raise SystemExit("numba path unavailable (DEGENFEM_NO_NUMBA set or "
                         "numba missing); nothing to compare")

    tri, _ = meshgen.babuska_aziz(args.nx, args.ny)
    u = quadratic_solution()
    xy = tri.vertices
    tris = tri.triangles
    values = np.ascontiguousarray(u.u_at(xy))
    grads_np = impls["numpy"]["element_gradients"](xy, tris, values)
    qpts = physical_points(MIDPOINT_BARY, xy[tris])
    gu = np.ascontiguousarray(u.grad_at(qpts))
    areas = np.ascontiguousarray(tri.areas)

    rng = np.random.default_rng(0)
    pts = np.ascontiguousarray(rng.uniform(0, 1, size=(args.points, 2)))
    u_vals = np.ascontiguousarray(u.u_at(pts))
    gu_pts = np.ascontiguousarray(u.grad_at(pts))
    centers = np.ascontiguousarray(rng.uniform(0.1, 0.9, size=(args.bumps, 2)))
    radii = np.full(args.bumps, 0.02)
    kinds = (np.arange(args.bumps) % 2).astype(np.int64)
    amps = rng.standard_normal(args.bumps)
    planes = np.ascontiguousarray(rng.standard_normal((args.bumps, 3)))

    cases = {
        "triangle_metrics": (xy, tris),
        "stiffness_local": (xy, tris),
        "element_gradients": (xy, tris, values),
        "h1_error_terms": (areas, grads_np, gu, MIDPOINT_WEIGHTS),
        "bump_eval": (pts, u_vals, gu_pts, centers, radii, kinds, amps, planes),
    }

    print(f"mesh: {tri.n_triangles} elements, {tri.n_vertices} vertices; "
          f"bump sums over {args.points} points, {args.bumps} bumps")
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}")
    for name, call_args in cases.items():
        impls["numba"][name](*call_args)  # compile outside the timing
        t_np, out_np = time_call(impls["numpy"][name], *call_args,
                                 repeat=args.repeat)
        t_nb, out_nb = time_call(impls["numba"][name], *call_args,
                                 repeat=args.repeat)
        for a, b in zip(np.atleast_1d(out_np), np.atleast_1d(out_nb)):
            np.testing.assert_allclose(np.asarray(a, dtype=float),
                                       np.asarray(b, dtype=float),
                                       rtol=1e-12, atol=1e-12)
        print(f"{name:<20}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}"
              f"{t_np / t_nb:>9.2f}")


if __name__ == "__main__":
    main()
