"""Exception types raised by triformation."""


class TriformationError(Exception):
    pass


class InvalidSpecError(TriformationError, ValueError):
    """Distance constraints are not positive or not realizable as a triangle."""


class CycleConstraintError(TriformationError, ValueError):
    """A link vector does not satisfy e1 + e2 + e3 = 0."""


class DomainError(TriformationError, ValueError):
    pass


class DegenerateError(TriformationError, ValueError):
    """A normal direction cannot be formed because the links are too short."""


class PreconditionError(TriformationError, ValueError):
    pass


class SolverError(TriformationError, RuntimeError):
    pass


class StallError(TriformationError, RuntimeError):
    """Integration hit the time limit without meeting a stop condition."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class VerificationError(TriformationError, AssertionError):
    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


class ConfigError(TriformationError, ValueError):
    pass
