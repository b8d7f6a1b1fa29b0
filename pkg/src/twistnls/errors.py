"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Parameters fall outside the hypotheses of the requested operation.

    The optional ``report`` carries the per-condition margins that led to
    the rejection (a :class:`twistnls.exponents.ValidationReport`).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolverError(RuntimeError):
    """A numerical solve failed (no contraction, blow-up, non-finite iterate).

    ``partial`` holds whatever result was completed before the failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
