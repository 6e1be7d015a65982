"""Exception types shared across the package."""


class TrefcapError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGeometryError(TrefcapError):
    """Degenerate or inconsistent boundary geometry."""


class InvalidBasisError(TrefcapError, ValueError):
    """Invalid weighting-function request (bad size or unknown policy)."""


class SingularSystemError(TrefcapError):
    """A dense solve was abandoned because the matrix is numerically singular.

    Carries the reciprocal condition estimate that triggered the abort.
    """

    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class FlatSingularityError(SingularSystemError):
    """The monolithic reference system could not be solved."""


class DegenerateBcError(TrefcapError):
    """Boundary conditions leave the potential undetermined (or over-determined)."""


class InvalidScaleError(TrefcapError, ValueError):
    """Non-positive scale factor."""


class RefinementError(TrefcapError):
    """Decomposition depth too small to separate distinct conductors."""


class ConformityError(TrefcapError):
    """Adjacent subdomains do not expose matching interface discretizations."""


class PairingError(TrefcapError):
    """Interface node pairing is inconsistent or incomplete."""


class MergeSingularityError(TrefcapError):
    """Interface Schur pivot is numerically singular.

    Carries the reciprocal condition estimate and a human-readable location.
    """

    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class UnderdeterminedProblemError(TrefcapError):
    """Fewer than two conductors (including the ground) in an extraction."""


class ProblemFormatError(TrefcapError):
    """Syntax or semantic error in a problem file; carries line/column."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ComparisonError(TrefcapError):
    """Matrices of different shapes were compared."""


class CacheFileError(TrefcapError):
    """Persisted cache file is malformed or violates stored-matrix invariants."""


class QuadratureWarning(UserWarning):
    """Requested quadrature order is below the polynomial-exactness bound."""
