"""Monotone P1 finite element solver for isotropic Isaacs equations."""

from .analysis import (
    CSV_HEADER,
    ErrorRecord,
    compute_errors,
    consistency_probe,
    convergence_study,
    format_convergence_csv,
)
from .assembly import (
    ControlGrid,
    FamilyAssembler,
    OperatorFamily,
    evaluate_infsup_residual,
)
from .errors import (
    AssemblyError,
    IsaacsFemError,
    MeshFormatError,
    MonotonicityError,
    ParameterError,
    ProjectionError,
    SolverError,
    StabilizationError,
    StudyError,
)
from .expressions import compile_expression
from .mesh import (
    AcutenessReport,
    Mesh,
    check_strict_acuteness,
    dump_mesh,
    generate_annulus_mesh,
    generate_triangle_mesh,
    load_mesh,
)
from .problems import (
    DomainSpec,
    IsaacsProblem,
    SmoothFunction,
    ValidationReport,
    build_domain_mesh,
    experiment1,
    pde_residual,
    problem_from_config,
    tag_chase,
    validate_problem,
)
from .projection import (
    ProjectionOperator,
    build_projection,
    piecewise_gradient,
    project,
)
from .solver import (
    HowardStats,
    SchemeConfig,
    TimeSeries,
    assemble_step_family,
    howard_solve_step,
    phi,
    psi,
    resolve_time_step,
    solve_isaacs,
)
from .stabilization import (
    SPLITTING_POLICIES,
    MonotonicityReport,
    SplitCoefficients,
    apply_splitting_policy,
    compute_artificial_viscosity,
    max_stable_timestep,
    operator_stability_norms,
    verify_monotonicity,
)

__version__ = "0.1.0"

__all__ = [
    "AcutenessReport",
    "AssemblyError",
    "CSV_HEADER",
    "ControlGrid",
    "DomainSpec",
    "ErrorRecord",
    "FamilyAssembler",
    "HowardStats",
    "IsaacsFemError",
    "IsaacsProblem",
    "Mesh",
    "MeshFormatError",
    "MonotonicityError",
    "MonotonicityReport",
    "OperatorFamily",
    "ParameterError",
    "ProjectionError",
    "ProjectionOperator",
    "SPLITTING_POLICIES",
    "SchemeConfig",
    "SmoothFunction",
    "SolverError",
    "SplitCoefficients",
    "StabilizationError",
    "StudyError",
    "TimeSeries",
    "ValidationReport",
    "apply_splitting_policy",
    "assemble_step_family",
    "build_domain_mesh",
    "build_projection",
    "check_strict_acuteness",
    "compile_expression",
    "compute_artificial_viscosity",
    "compute_errors",
    "consistency_probe",
    "convergence_study",
    "dump_mesh",
    "evaluate_infsup_residual",
    "experiment1",
    "format_convergence_csv",
    "generate_annulus_mesh",
    "generate_triangle_mesh",
    "howard_solve_step",
    "load_mesh",
    "max_stable_timestep",
    "operator_stability_norms",
    "pde_residual",
    "phi",
    "piecewise_gradient",
    "problem_from_config",
    "project",
    "psi",
    "resolve_time_step",
    "solve_isaacs",
    "tag_chase",
    "validate_problem",
    "verify_monotonicity",
    "__version__",
]
