"""Exception hierarchy shared across the package."""


class IsaacsFemError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(IsaacsFemError):
    """Invalid argument or input data (CLI exit code 2)."""


class MeshFormatError(ParameterError):
    """Malformed mesh file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class AssemblyError(IsaacsFemError):
    """Operator assembly violated a structural assumption (e.g. negative reaction)."""


class StabilizationError(IsaacsFemError):
    """Artificial diffusion cannot be computed (e.g. mesh not strictly acute)."""


class MonotonicityError(IsaacsFemError):
    """Monotone matrix structure violated; carries the offending location."""


class ProjectionError(IsaacsFemError):
    """Elliptic projection could not be constructed or applied."""


class SolverError(IsaacsFemError):
    """Howard iteration or linear solve failed (CLI exit code 3)."""


class StudyError(SolverError):
    """A convergence-study level failed; completed rows are on .records."""

    def __init__(self, message: str, records=()):
        super().__init__(message)
        self.records = list(records)
