"""Convergence-study harness: one solve per mesh size, CSV table and JSON
summary with a fitted log-log rate.

CSV columns are fixed: h,hbar,dofs,h1_error,h1_error_band,l2_gamma,a1,a2,
nec_lhs,rate_running.  Floats are printed with 17 significant digits so the
table round-trips losslessly; empty cells are 'nan'.  Identical configs
produce byte-identical output.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import analysis, fem, interp, mesh, meshgen
from .errors import InvalidParameters

FAMILIES = ("uniform", "single_band", "babuska_aziz", "subdivided_band", "cluster")
CSV_COLUMNS = ("h", "hbar", "dofs", "h1_error", "h1_error_band", "l2_gamma",
               "a1", "a2", "nec_lhs", "rate_running")


@dataclass
class StudyConfig:
    family: str
    h_sequence: list
    beta: float = 1.0              # hbar = h^beta for the band families
    alpha_target: float = 1.0
    solution: str = "quadratic"
    seed: int = 0
    alpha0: float = 0.9 * math.pi
    sum_h2_budget: float | None = None

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise InvalidParameters(f"unknown family {self.family!r}")
        hs = list(self.h_sequence)
        if len(hs) < 1 or any(hs[i] <= hs[i + 1] for i in range(len(hs) - 1)):
            raise InvalidParameters("h_sequence must be strictly decreasing")
        if self.beta < 1.0:
            raise InvalidParameters("beta must be >= 1")
        if not 0.0 <= self.alpha_target <= 1.0:
            raise InvalidParameters("alpha_target must lie in [0, 1]")
        if self.solution not in interp.SOLUTIONS:
            raise InvalidParameters(f"unknown solution {self.solution!r}")


@dataclass
class StudyResult:
    config: StudyConfig
    rows: list
    fitted_rate: float
    fit_residual: float
    extras: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "family": self.config.family,
            "h_sequence": list(self.config.h_sequence),
            "beta": self.config.beta,
            "alpha_target": self.config.alpha_target,
            "solution": self.config.solution,
            "fitted_rate": self.fitted_rate,
            "fit_residual": self.fit_residual,
            "rows": self.rows,
            "levels": self.extras,
        }
        return json.dumps(payload, indent=2, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def run_study(config: StudyConfig) -> StudyResult:
    config.validate()
    u = interp.SOLUTIONS[config.solution]()
    rows = []
    extras = []
    degree = 2 if config.solution == "quadratic" else 5
    for h in config.h_sequence:
        nx = round(1.0 / h)
        level = {"h": float(h)}
        extra = {"h": float(h)}
        hbar = float("nan")
        bands = []
        tilde_meta = None
        cluster_info = None
        if config.family == "uniform":
            tri = meshgen.unit_square_uniform(nx)
        elif config.family == "babuska_aziz":
            ny = max(1, round(nx ** config.beta))
            hbar = 1.0 / ny
            tri, bands = meshgen.babuska_aziz(nx, ny)
        elif config.family == "single_band":
            hbar = h ** config.beta
            tri, band = meshgen.single_band_mesh(nx, hbar)
            bands = [band]
        elif config.family == "subdivided_band":
            hbar = h ** config.beta
            tri, tilde_meta = meshgen.subdivided_band_mesh(nx, hbar)
        else:  # cluster
            k = max(2, nx // 4)
            rows_in_block = max(1, round(k / (nx * h**2)))
            tri, cluster_info = meshgen.cluster_mesh(
                nx, ((nx - k) // 2, (nx - k) // 2, k), rows_in_block)

        system = fem.assemble(tri, u)
        U = fem.solve(system)
        level["hbar"] = hbar
        level["dofs"] = int(len(system.interior))
        level["h1_error"] = analysis.h1_error(u, U, tri, degree=degree)

        level["h1_error_band"] = float("nan")
        level["l2_gamma"] = float("nan")
        level["a1"] = float("nan")
        level["a2"] = float("nan")
        level["nec_lhs"] = float("nan")

        usable = [b for b in bands if len(b.even_elements) and b.alternating]
        if usable:
            b0 = usable[0]
            split = analysis.band_split(u, U, b0, tri)
            level["h1_error_band"] = split.h1_error_on_tilde
            level["a1"] = split.a1
            level["a2"] = split.a2
            level["l2_gamma"] = analysis.l2_boundary_error(u, U, b0.gamma_edges, tri)
            nec = analysis.necessary_condition_report(
                usable, tri, alpha=config.alpha_target)
            extra["necessary"] = nec
            if config.family == "single_band":
                level["nec_lhs"] = nec["per_band"][0]["value"]
            else:
                level["nec_lhs"] = nec["aggregate"]
        if tilde_meta is not None:
            extra.update(_subdivided_level(u, tri, U, tilde_meta, config, degree))
            level["l2_gamma"] = analysis.l2_boundary_error(
                u, U, tilde_meta["gamma_edges"], tri)
        if cluster_info is not None:
            extra["cluster"] = {
                "diameter": cluster_info["diameter"],
                "block_diagonal": cluster_info["block_diagonal"],
                "n_elements": int(len(cluster_info["elements"])),
            }
        rows.append(level)
        extras.append(extra)

    for i, row in enumerate(rows):
        if i == 0:
            row["rate_running"] = float("nan")
        else:
            e0, e1 = rows[i - 1]["h1_error"], row["h1_error"]
            h0, h1 = rows[i - 1]["h"], row["h"]
            row["rate_running"] = math.log(e0 / e1) / math.log(h0 / h1)

    errs = [row["h1_error"] for row in rows]
    if len(rows) >= 2:
        rate, residual = analysis.fit_rate([r["h"] for r in rows], errs)
    else:
        rate, residual = float("nan"), float("nan")
    return StudyResult(config=config, rows=rows, fitted_rate=rate,
                       fit_residual=residual, extras=extras)


def _subdivided_level(u, tri, U, meta, config, degree) -> dict:
    """Correction pipeline on a subdivided-band level: admissibility report,
    corrected-interpolant error and the optimality comparison."""
    cls = mesh.classify(tri, config.alpha0)
    spec = interp.build_correction(u, tri, cls,
                                   sum_h2_budget=config.sum_h2_budget)
    report = analysis.sufficient_check(tri, cls, spec)
    out = {"sufficient": report}
    if spec.admissible:
        corrected = interp.corrected_interpolant(u, tri, spec)
        out["corrected_h1_error"] = analysis.h1_error(u, corrected, tri,
                                                      degree=degree)
        cea = fem.cea_check(u, tri, U, [corrected], degree=degree)
        out["cea_ok"] = cea["all_ok"]
        out["cea_candidate_error"] = cea["candidates"][0]["err"]
    return out
