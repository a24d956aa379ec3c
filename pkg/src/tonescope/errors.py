"""Exception types shared across the package.

The CLI maps InputError to exit code 2 and NumericalError to exit code 3.
"""


class InputError(ValueError):
    """Caller supplied data that violates a precondition."""


class FormatError(InputError):
    """A file is syntactically broken or uses an unsupported encoding."""


class NumericalError(RuntimeError):
    """An iterative computation produced non-finite values.

    The partially completed objective trace, when available, is attached
    as the ``trace`` attribute for post-mortem inspection.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
