"""Exception taxonomy shared by all modules."""


class KitError(Exception):
    """Base class for all alexkit errors."""


class Refusal(KitError):
    """A precondition is not met; the operation refuses to run.

    The CLI maps this to exit code 2.
    """


class DomainError(Refusal):
    """Numeric input outside the mathematical domain of an operation."""


class NoComparisonTriangle(KitError):
    """No triangle with the given sides exists on the comparison plane."""

    def __init__(self, condition: str):
        super().__init__(f"comparison triangle does not exist: {condition}")
        self.condition = condition


class UndefinedAngle(KitError):
    """Angle at a vertex adjacent to a zero-length (or antipodal) side."""


class FlowStalled(KitError):
    """A discrete gradient curve found no candidate step."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
