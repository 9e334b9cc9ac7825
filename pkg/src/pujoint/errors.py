"""Error types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not agree with what an operation requires."""


class NumericError(ArithmeticError):
    """A value that must be finite is NaN or infinite; the trial should abort."""


class FormatError(ValueError):
    """A file (IDX, CSV, checkpoint, config) does not match its expected layout."""


class StateError(RuntimeError):
    """An operation was invoked against state that cannot serve it
    (missing prediction history, hidden truth not available, ...)."""
