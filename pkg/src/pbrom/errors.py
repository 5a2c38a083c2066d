"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures onto process exit statuses without inspecting messages.
"""


class PBError(Exception):
    exit_code = 2


class PQRParseError(PBError):
    exit_code = 1

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmptyStructureError(PQRParseError):
    pass


class GridError(PBError):
    """Inconsistent grid or map dimensions."""


class PlacementError(GridError):
    """An atom sits too close to the grid boundary for charge spreading."""

    def __init__(self, message, atom_index=None):
        super().__init__(message)
        self.atom_index = atom_index


class SingularityError(PBError):
    """A boundary node coincides with an atom center."""


class SolverError(PBError):
    exit_code = 3


class DivergenceError(SolverError):
    """Iteration limit reached; the best iterate and report are attached."""

    def __init__(self, message, solution=None, report=None):
        super().__init__(message)
        self.solution = solution
        self.report = report


class MatrixPropertyError(SolverError):
    """Non-positive curvature met during conjugate gradients."""


class DegenerateSnapshotError(PBError):
    pass


class DEIMDegeneracyError(PBError):
    pass


class ConditioningError(PBError):
    pass


class ContainerError(PBError):
    exit_code = 4
