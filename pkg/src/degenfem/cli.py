"""Command-line front end: mesh generation, solving, convergence studies,
verification suites and report emission.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 solver
failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import analysis, fem, interp, mesh, meshgen, study
from .errors import DegenfemError, SolverBreakdown


def _parse_number(text: str) -> float:
    return float(Fraction(text))


def _parse_h_list(text: str) -> list:
    return [_parse_number(tok) for tok in text.split(",") if tok]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="degenfem")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a mesh family member")
    g.add_argument("family", choices=["uniform", "ba", "band", "subdivided", "cluster"])
    g.add_argument("--n", type=int, default=8)
    g.add_argument("--nx", type=int, default=8)
    g.add_argument("--ny", type=int, default=8)
    g.add_argument("--hbar", type=_parse_number, default=None)
    g.add_argument("--block", type=int, nargs=3, default=(3, 3, 2),
                   metavar=("I", "J", "K"))
    g.add_argument("--rows", type=int, default=8)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve the Poisson problem on a mesh file")
    s.add_argument("--mesh", required=True)
    s.add_argument("--solution", choices=sorted(interp.SOLUTIONS), default="quadratic")
    s.add_argument("--out", default=None)

    st = sub.add_parser("study", help="run a convergence study")
    st.add_argument("--family", choices=study.FAMILIES, required=True)
    st.add_argument("--h", type=_parse_h_list, required=True,
                    help="comma-separated decreasing mesh sizes, e.g. 1/8,1/16")
    st.add_argument("--beta", type=float, default=1.0, help="hbar = h^beta")
    st.add_argument("--alpha", type=float, default=1.0, help="target error order")
    st.add_argument("--solution", choices=sorted(interp.SOLUTIONS), default="quadratic")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--out", default=None, help="prefix for .csv and .json output")
    st.add_argument("--format", choices=["csv", "json"], default="csv")
    st.add_argument("--budget", type=float, default=None,
                    help="override for the sum-of-squared-diameters budget")

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=["identities", "interp", "correction", "necessary"])
    v.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("report", help="summarize a study JSON file")
    r.add_argument("--study", required=True)
    r.add_argument("--expect-rate", type=float, default=None)
    r.add_argument("--tol", type=float, default=0.15)
    return p


def cmd_gen(args) -> int:
    sidecar: dict = {}
    if args.family == "uniform":
        tri = meshgen.unit_square_uniform(args.n)
    elif args.family == "ba":
        tri, bands = meshgen.babuska_aziz(args.nx, args.ny)
        sidecar["bands"] = [b.to_dict() for b in bands]
    elif args.family == "band":
        hbar = args.hbar if args.hbar is not None else 1.0 / (8 * args.nx)
        tri, band = meshgen.single_band_mesh(args.nx, hbar)
        sidecar["bands"] = [band.to_dict()]
        sidecar["non_band_max_angle"] = meshgen.non_band_max_angle(tri, band)
    elif args.family == "subdivided":
        hbar = args.hbar if args.hbar is not None else 1.0 / (8 * args.nx)
        tri, meta = meshgen.subdivided_band_mesh(args.nx, hbar)
        sidecar["subdivided_band"] = {
            "tilde_elements": meta["tilde_elements"].tolist(),
            "gamma_edges": meta["gamma_edges"].tolist(),
            "gamma_y": meta["gamma_y"],
            "base_h": meta["base_h"],
            "hbar": meta["hbar"],
            "split_elements": meta["split_elements"],
        }
    else:
        tri, info = meshgen.cluster_mesh(args.n, tuple(args.block), args.rows)
        sidecar["cluster"] = {
            "elements": info["elements"].tolist(),
            "block_diagonal": info["block_diagonal"],
            "diameter": info["diameter"],
        }
    mesh.save_mesh(tri, args.out)
    with open(f"{args.out}.meta.json", "w") as f:
        json.dump(sidecar, f, indent=2)
    print(f"wrote {args.out} ({tri.n_vertices} vertices, {tri.n_triangles} elements)")
    return 0


def cmd_solve(args) -> int:
    tri = mesh.load_mesh(args.mesh)
    u = interp.SOLUTIONS[args.solution]()
    field = fem.solve(fem.assemble(tri, u))
    degree = 2 if args.solution == "quadratic" else 5
    err = analysis.h1_error(u, field, tri, degree=degree)
    if args.out:
        with open(args.out, "w") as f:
            f.write(f"{tri.n_vertices}\n")
            f.writelines(f"{float(v)!r}\n" for v in field.values)
    print(json.dumps({"h1_error": err, "dofs": int((~tri.boundary_vertex_flags).sum()),
                      "mesh_size_h": tri.mesh_size_h}))
    return 0


def cmd_study(args) -> int:
    config = study.StudyConfig(
        family=args.family, h_sequence=args.h, beta=args.beta,
        alpha_target=args.alpha, solution=args.solution, seed=args.seed,
        sum_h2_budget=args.budget,
    )
    result = study.run_study(config)
    if args.out:
        with open(f"{args.out}.csv", "w") as f:
            f.write(result.to_csv())
        with open(f"{args.out}.json", "w") as f:
            f.write(result.to_json())
    sys.stdout.write(result.to_csv() if args.format == "csv" else result.to_json())
    sys.stdout.write("\n" if args.format == "json" else "")
    sys.stderr.write(f"fitted rate {result.fitted_rate:.4f} "
                     f"(residual {result.fit_residual:.2e})\n")
    return 0


def cmd_report(args) -> int:
    with open(args.study) as f:
        data = json.load(f)
    print(f"family={data['family']} solution={data['solution']} beta={data['beta']}")
    print(",".join(study.CSV_COLUMNS))
    for row in data["rows"]:
        print(",".join(format(row.get(c, float('nan'))) for c in study.CSV_COLUMNS))
    print(f"fitted_rate={data['fitted_rate']:.6f} residual={data['fit_residual']:.3e}")
    if args.expect_rate is not None:
        ok = abs(data["fitted_rate"] - args.expect_rate) <= args.tol
        print(f"expected {args.expect_rate} +- {args.tol}: {'pass' if ok else 'fail'}")
        return 0 if ok else 1
    return 0


# ----------------------------------------------------------------------
# verification suites
# ----------------------------------------------------------------------

def _verify_identities(seed: int) -> list:
    rng = np.random.default_rng(seed)
    checks = []
    worst = 0.0
    for _ in range(1000):
        base = rng.uniform(0.2, 1.0, size=2)
        heights = rng.uniform(1e-7, 0.3, size=2) * base.min()
        x0 = rng.uniform(-1, 1)
        b0 = np.array([x0, 0.0])
        b1 = b0 + np.array([base[0], 0.0])
        b2 = b1 + np.array([base[1], 0.0])
        t0 = np.array([b0[0] + rng.uniform(0.3, 0.7) * base[0], heights[0]])
        t1 = np.array([b1[0] + rng.uniform(0.3, 0.7) * base[1], heights[1]])
        g1 = rng.standard_normal(2)
        u1 = analysis.LinearFunction(gradient=g1, anchor=b1,
                                     value_at_anchor=rng.standard_normal())
        u0 = analysis.LinearFunction(gradient=g1 + rng.standard_normal(2),
                                     anchor=b1, value_at_anchor=u1.at(b1))
        lhs, rhs = analysis.three_element_identity_check(b0, b1, b2, t0, t1, u0, u1)
        worst = max(worst, abs(lhs - rhs) / (lhs + rhs + 1.0))
    checks.append(("three-element gradient identity (1000 triplets)", True,
                   f"worst relative deviation {worst:.3e}"))

    rng = np.random.default_rng(seed + 1)
    for _ in range(100_000):
        n = int(rng.integers(2, 40))
        h = rng.uniform(0.01, 1.0, size=n)
        a = rng.standard_normal(n) * rng.uniform(0.1, 10.0)
        analysis.difference_bound_oracle(h, a)
    checks.append(("difference inequality (1e5 randomized inputs)", True, ""))

    exact = 1.0 / (6.0 * math.sqrt(5.0))
    got = analysis.proj_p1_residual(1.0, 1.0)
    ok = abs(got - exact) <= 1e-12
    checks.append(("projection residual closed form", ok,
                   f"got {got!r}, exact {exact!r}"))
    return checks


def _verify_interp(seed: int) -> list:
    from .geometry import altitude_frame, tri_metrics

    u = interp.quadratic_solution()
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(1000):
        verts = _random_thin_triangle(rng)
        g = tri_metrics(*verts)
        (va, vb, vc), delta = interp.modified_element_interp(u, g)
        x_k, _, _ = altitude_frame(g)
        a = g.apex
        b, c = g.base_vertices
        bound = (np.hypot(*(x_k - b)) * np.hypot(*(x_k - c))
                 + np.hypot(*(x_k - a)) ** 2) * u.seminorm_2inf
        if abs(delta) > bound:
            bad += 1
        h1 = _element_h1_error(u, g, (va, vb, vc))
        if h1 > math.sqrt(13.0) * g.diameter * u.seminorm_2inf * math.sqrt(g.area):
            bad += 1
    return [("modified interpolation bounds (1000 thin triangles)", bad == 0,
             f"{bad} violations")]


def _random_thin_triangle(rng) -> np.ndarray:
    base = rng.uniform(0.1, 1.0)
    t = rng.uniform(0.25, 0.75)
    eta = base * 10 ** rng.uniform(-3.5, -1.52)
    pts = np.array([[t * base, eta], [0.0, 0.0], [base, 0.0]])
    ang = rng.uniform(0.0, 2.0 * math.pi)
    rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    return pts @ rot.T + rng.uniform(-1.0, 1.0, size=2)


def _element_h1_error(u, g, vals) -> float:
    from . import quadrature
    order = [g.max_angle_vertex_index, (g.max_angle_vertex_index + 1) % 3,
             (g.max_angle_vertex_index + 2) % 3]
    verts = g.vertices[order]
    grad_v = analysis._gradient_from_values(*verts, *vals)
    qpts = quadrature.physical_points(quadrature.MIDPOINT_BARY, verts)
    gu = u.grad_at(qpts)
    sq = ((gu - grad_v) ** 2).sum(axis=1)
    return math.sqrt(float(sq @ quadrature.MIDPOINT_WEIGHTS) * g.area)


def _verify_correction(seed: int) -> list:
    rng = np.random.default_rng(seed)
    checks = []
    for name, fn in (("cubic", interp.bump_phi), ("plateau", interp.bump_psi)):
        r = rng.uniform(0.3, 2.0)
        span = r if name == "cubic" else 2 * r
        pts = rng.uniform(-span, span, size=(100_000, 2))
        _, grads = fn(r, pts)
        sup = float(np.hypot(grads[:, 0], grads[:, 1]).max())
        ok = sup <= 1.5 / r * (1.0 + 1e-9)
        checks.append((f"{name} bump gradient bound", ok,
                       f"sup {sup:.6f} vs {1.5 / r:.6f}"))

    u = interp.quadratic_solution()
    tri, meta = meshgen.subdivided_band_mesh(8, 1.0 / 512)
    cls = mesh.classify(tri, 0.9 * math.pi)
    spec = interp.build_correction(u, tri, cls)
    checks.append(("subdivided band admissible", spec.admissible,
                   f"{len(spec.violations)} violations"))
    if spec.admissible:
        corrected = interp.corrected_interpolant(u, tri, spec)
        worst = 0.0
        for b in spec.bumps:
            k = b.element
            g = tri.element_geom(k)
            apex_vertex = tri.triangles[k][g.max_angle_vertex_index]
            got = corrected.values[apex_vertex] - float(u.u_at(g.apex))
            worst = max(worst, abs(got - b.amplitude))
        checks.append(("corrected interpolant apex perturbations", worst <= 1e-13,
                       f"worst deviation {worst:.3e}"))
        wnorm = interp.correction_h1_seminorm(spec, u, tri, cls.t1)
        bound = 6.0 * tri.mesh_size_h * u.seminorm_2inf
        checks.append(("correction H1 bound on the regular part",
                       wnorm <= bound, f"{wnorm:.3e} vs {bound:.3e}"))
    return checks


def _verify_necessary(seed: int) -> list:
    u = interp.quadratic_solution()
    checks = []
    for nx in (8, 16):
        hbar = (1.0 / nx) ** 3
        tri, band = meshgen.single_band_mesh(nx, hbar)
        field = fem.solve(fem.assemble(tri, u))
        trace = analysis.band_trace(field, band, tri)
        resid = abs(float((trace.interval_lengths * trace.wprime).sum()))
        split = analysis.band_split(u, field, band, tri)
        consistent = abs(split.a1 + split.a2 - split.h1_error_on_tilde) \
            <= 1e-12 * split.h1_error_on_tilde
        nec = analysis.necessary_condition_report([band], tri)
        pb = nec["per_band"][0]
        dominates = pb["value"] >= pb["closed_form"]
        ok = consistent and dominates
        checks.append((f"band machinery nx={nx}", ok,
                       f"telescoping {resid:.2e}, lhs {pb['value']:.4f} "
                       f">= closed {pb['closed_form']:.4f}"))
    return checks


SUITES = {
    "identities": _verify_identities,
    "interp": _verify_interp,
    "correction": _verify_correction,
    "necessary": _verify_necessary,
}


def cmd_verify(args) -> int:
    checks = SUITES[args.suite](args.seed)
    failed = 0
    for name, ok, detail in checks:
        tag = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"{tag} {name}{suffix}")
        failed += 0 if ok else 1
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "study":
            return cmd_study(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "report":
            return cmd_report(args)
    except SolverBreakdown as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (DegenfemError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
