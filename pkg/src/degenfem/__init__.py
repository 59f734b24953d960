"""degenfem: P1 finite elements on degenerate 2D triangulations.

Mesh families whose elements degenerate in controlled ways (band strips,
multi-band tilings, subdivided chains, clusters), a Poisson solver with an
optimality oracle, H1-seminorm error measurement, and the interpolation
machinery (modified nodal interpolation plus bump-based corrections) that
restores first-order convergence on meshes the classical angle conditions
reject.
"""
from .analysis import (
    band_split,
    band_trace,
    difference_bound_oracle,
    fit_rate,
    h1_error,
    l2_boundary_error,
    necessary_condition_report,
    proj_p1_residual,
    sufficient_check,
    three_element_identity_check,
)
from .fem import assemble, cea_check, solve
from .geometry import altitude_frame, angle_between, tri_metrics
from .interp import (
    build_correction,
    bump_phi,
    bump_psi,
    corrected_interpolant,
    lagrange,
    modified_element_interp,
    quadratic_solution,
    sine_solution,
    tangent_plane,
)
from .kernels import BACKEND
from .mesh import build, classify, load_mesh, save_mesh
from .meshgen import (
    babuska_aziz,
    cluster_mesh,
    row_mesh,
    single_band_mesh,
    subdivided_band_mesh,
    unit_square_uniform,
)
from .study import StudyConfig, run_study

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "StudyConfig", "altitude_frame", "angle_between", "assemble",
    "babuska_aziz", "band_split", "band_trace", "build", "build_correction",
    "bump_phi", "bump_psi", "cea_check", "classify", "cluster_mesh",
    "corrected_interpolant", "difference_bound_oracle", "fit_rate",
    "h1_error", "l2_boundary_error", "lagrange", "load_mesh",
    "modified_element_interp", "necessary_condition_report",
    "proj_p1_residual", "quadratic_solution", "row_mesh", "run_study",
    "save_mesh", "sine_solution", "single_band_mesh", "solve",
    "subdivided_band_mesh", "sufficient_check", "tangent_plane",
    "three_element_identity_check", "tri_metrics", "unit_square_uniform",
]
