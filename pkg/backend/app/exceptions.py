from typing import Optional, Tuple


class CoherenceError(Exception):
    """
    Base class for all errors raised by the coherence toolkit
    """


class ValidationError(CoherenceError):
    """
    Input is well-formed but not a valid operator or state
    """


class NonHermitianError(ValidationError):
    """
    Matrix violates the Hermitian symmetry tolerance
    """
    def __init__(self, message: str, indices: Optional[Tuple[int, int]] = None, deviation: float = 0.0):
        super().__init__(message)
        self.indices = indices
        self.deviation = deviation


class NotPSDError(ValidationError):
    """
    Matrix has an eigenvalue below the negative clipping band
    """
    def __init__(self, message: str, min_eigenvalue: float = 0.0):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class TraceError(ValidationError):
    """
    Density matrix does not have unit trace
    """
    def __init__(self, message: str, trace: complex = 0.0):
        super().__init__(message)
        self.trace = trace


class DimensionMismatchError(ValidationError):
    """
    Operand dimensions are incompatible
    """


class SupportViolationError(CoherenceError):
    """
    supp(rho) is not contained in supp(sigma) where the quantity requires it
    """


class StateParseError(CoherenceError):
    """
    State file could not be read or has the wrong structure
    """


class SolverFailureError(CoherenceError):
    """
    Semidefinite program did not reach a certified optimum
    """
    def __init__(self, message: str, status: Optional[str] = None, duality_gap: Optional[float] = None):
        super().__init__(message)
        self.status = status
        self.duality_gap = duality_gap
