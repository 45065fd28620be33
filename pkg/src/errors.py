from typing import Optional


class MaxwellHmmError(Exception):
    """Base class for all errors raised by the solver"""


class ConfigError(MaxwellHmmError, ValueError):
    """Invalid or unreadable run configuration"""


class GeometryError(MaxwellHmmError, ValueError):
    """Boxes or inclusions violating the geometric preconditions"""


class AlignmentError(GeometryError):
    """Inclusion faces do not lie on mesh planes, so the interface is unresolved"""


class TransferError(MaxwellHmmError, ValueError):
    """Fields cannot be transferred between the requested meshes"""


class SolverError(MaxwellHmmError, RuntimeError):
    """A linear solve failed to produce an admissible solution"""


class SingularMatrixError(SolverError):
    """Numerically singular pivot during factorization"""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message)
        self.row = row


class ResonanceError(SolverError):
    """Cell problem 3 hit a Maxwell eigenvalue of the inclusion"""
