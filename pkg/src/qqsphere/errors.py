"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for invalid input, 3 for solver/eigensolver failures, 4 for unmet
mathematical preconditions.
"""


class QQError(Exception):
    exit_code = 2


# -- input validation (exit 2) ---------------------------------------------

class ValidationError(QQError, ValueError):
    exit_code = 2


class MalformedDocument(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NonHermitian(ValidationError):
    pass


class NonPositiveBeta(ValidationError):
    pass


class BadKindDimension(ValidationError):
    pass


class FieldMismatch(ValidationError):
    pass


class NotOnSphere(ValidationError):
    pass


class NotTangent(ValidationError):
    pass


class NotUnit(ValidationError):
    pass


class ZeroVector(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class NotDiagonal(ValidationError):
    pass


class DimensionTooLarge(ValidationError):
    pass


class ComplexNotSupported(ValidationError):
    pass


class EmptyCatalog(ValidationError):
    pass


# -- numerical failures (exit 3) --------------------------------------------

class NumericalError(QQError, ArithmeticError):
    exit_code = 3


class EigSolverFailure(NumericalError):
    pass


class LineSearchStalled(NumericalError):
    pass


class SolverFailed(NumericalError):
    pass


class SolverDidNotImprove(NumericalError):
    pass


class TooFewSamples(NumericalError):
    pass


# -- unmet preconditions (exit 4) -------------------------------------------

class PreconditionError(QQError):
    exit_code = 4


class NotStationary(PreconditionError):
    pass


class NotNearStationary(NotStationary):
    """Newton polishing requested outside its basin (grad norm too large)."""


class ConditionViolated(PreconditionError):
    pass


class DegenerateTwoPoint(PreconditionError):
    pass


class NoOrthogonalMinimum(PreconditionError):
    pass


class NoSpectralGap(PreconditionError):
    pass


class NotInRegion(PreconditionError):
    pass
