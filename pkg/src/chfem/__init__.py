"""Energy-stable second-order mixed finite element solver for the 2D
Cahn-Hilliard equation on the unit square.

The package couples a conserved phase field with its chemical potential in
equal-order Lagrange spaces, advances them with an unconditionally stable
two-step convex-splitting integrator, monitors the discrete energy law at
runtime, and measures convergence through Cauchy differences on nested
meshes.
"""

__version__ = "0.1.0"

from .mesh import Mesh, build_uniform, refine
from .fem import FeSpace, Field, build_space, interpolate_nodal, integrate
from .operators import (
    NormKind,
    discrete_laplacian,
    h_minus1_norm,
    inverse_laplacian,
    l2_project,
    norm,
    prolong,
    ritz_project,
)
from .scheme import (
    InitialCondition,
    SchemeParams,
    SchemeState,
    constant_ic,
    cosine_product_ic,
    run,
)
from .diagnostics import (
    DiagnosticsRecord,
    Trajectory,
    free_energy,
    modified_energy,
    stability_ledger,
    write_diagnostics_csv,
)
from .harness import CauchyRow, ConvergenceConfig, cauchy_study, rate
from .vtkio import write_mesh_vtk, write_snapshot

__all__ = [
    "Mesh", "build_uniform", "refine",
    "FeSpace", "Field", "build_space", "interpolate_nodal", "integrate",
    "NormKind", "discrete_laplacian", "h_minus1_norm", "inverse_laplacian",
    "l2_project", "norm", "prolong", "ritz_project",
    "InitialCondition", "SchemeParams", "SchemeState",
    "constant_ic", "cosine_product_ic", "run",
    "DiagnosticsRecord", "Trajectory", "free_energy", "modified_energy",
    "stability_ledger", "write_diagnostics_csv",
    "CauchyRow", "ConvergenceConfig", "cauchy_study", "rate",
    "write_mesh_vtk", "write_snapshot",
]
