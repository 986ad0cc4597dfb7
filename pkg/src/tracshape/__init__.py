"""tracshape: linear-elastic shape optimization on simplex meshes.

FEA (tri3 plane stress / tet4 solid), exact discrete shape sensitivities,
traction-method boundary smoothing, constrained descent, and STL export.
"""

from tracshape._kernels import BACKEND
from tracshape.errors import (
    ConvergenceError,
    ExportError,
    FixtureError,
    MeshFormatError,
    MeshValidationError,
    SingularSystemError,
    SolveError,
    TracshapeError,
)
from tracshape.fem import (
    PAPER_STEEL,
    DirichletBC,
    Evaluation,
    LoadCase,
    Material,
    NeumannLoad,
    Solution,
    SolverOptions,
    assemble,
    evaluate,
    solve_static,
)
from tracshape.fixtures import make_fixture
from tracshape.mesh import (
    Mesh,
    MeshReport,
    RegionTag,
    load_mesh,
    loads_mesh,
    measure,
    save_mesh,
    dumps_mesh,
    validate,
)
from tracshape.optimize import (
    HistoryRecord,
    OptimizationProblem,
    StepControl,
    optimize,
    traction_smooth,
)
from tracshape.rp import (
    DraftReport,
    ManifoldReport,
    SurfaceModel,
    check_manifold,
    draft_check,
    read_stl,
    surface_mesh,
    write_stl,
)
from tracshape.sensitivity import (
    compliance_gradient,
    fd_check,
    stress_aggregate_gradient,
    volume_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvergenceError",
    "DirichletBC",
    "DraftReport",
    "Evaluation",
    "ExportError",
    "FixtureError",
    "HistoryRecord",
    "LoadCase",
    "ManifoldReport",
    "Material",
    "Mesh",
    "MeshFormatError",
    "MeshReport",
    "MeshValidationError",
    "NeumannLoad",
    "OptimizationProblem",
    "PAPER_STEEL",
    "RegionTag",
    "SingularSystemError",
    "Solution",
    "SolveError",
    "SolverOptions",
    "StepControl",
    "SurfaceModel",
    "TracshapeError",
    "assemble",
    "check_manifold",
    "compliance_gradient",
    "draft_check",
    "dumps_mesh",
    "evaluate",
    "fd_check",
    "load_mesh",
    "loads_mesh",
    "make_fixture",
    "measure",
    "optimize",
    "read_stl",
    "save_mesh",
    "solve_static",
    "stress_aggregate_gradient",
    "surface_mesh",
    "traction_smooth",
    "validate",
    "volume_gradient",
    "write_stl",
]
