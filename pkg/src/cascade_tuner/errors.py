"""Exception types shared across the package.

Each class maps to a distinct CLI exit code (see cli.EXIT_CODES).
"""


class CascadeTunerError(Exception):
    """Base class for all package errors."""


class ThresholdValidationError(CascadeTunerError):
    """A threshold vector violates length, range, or ordering constraints."""


class DataSchemaError(CascadeTunerError):
    """A dataset file fails schema validation. Messages name row/column."""


class DegenerateFitError(CascadeTunerError):
    """A fit cannot proceed: single-class labels, constant margins, etc."""


class QuadratureError(CascadeTunerError):
    """Numerical integration failed to reach its accuracy target."""

    def __init__(self, message: str, achieved_error: float):
        super().__init__(f"{message} (achieved error {achieved_error:.3e})")
        self.achieved_error = achieved_error
