"""Exception hierarchy.

``ValidationError`` subclasses signal bad input (CLI exit code 1); everything
else deriving from ``WorkZoneError`` is a runtime failure (exit code 2).
"""


class WorkZoneError(Exception):
    pass


class ValidationError(WorkZoneError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SchemaError(ValidationError):
    pass


class TooShort(ValidationError):
    pass


class NonUniformSampling(ValidationError):
    pass


class EmptyInterval(ValidationError):
    pass


class MismatchedControlPoints(ValidationError):
    pass


class ZeroReference(ValidationError):
    pass


class ClassUnderrepresented(WorkZoneError):
    pass


class LayoutMismatch(WorkZoneError):
    pass


class IncompleteRuns(WorkZoneError):
    pass


class CollisionDetected(WorkZoneError):
    pass


class InvariantViolation(WorkZoneError):
    pass


class Clamped(WorkZoneError):
    pass


class NoApplicableAction(WorkZoneError):
    pass


class EmptyField(UserWarning):
    pass
