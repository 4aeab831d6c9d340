"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedCaseError(DomainError):
    """The operation is well defined but not implemented for this input."""


class NumericalError(RuntimeError):
    """A computation produced a non-finite or inconsistent value.

    ``stage``, ``iteration`` and ``step`` locate the failure when known.
    """

    def __init__(self, message, *, stage=None, iteration=None, step=None):
        self.detail = message
        self.stage = stage
        self.iteration = iteration
        self.step = step
        where = []
        if stage is not None:
            where.append(f"stage={stage}")
        if iteration is not None:
            where.append(f"iteration={iteration}")
        if step is not None:
            where.append(f"step={step}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
