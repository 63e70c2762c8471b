"""Exception types shared across the package."""


class MomentSpectraError(Exception):
    """Base class for all structured errors raised by this package."""


class MemoryBudgetError(MomentSpectraError):
    """A tensor or polynomial would exceed the configured entry budget."""

    def __init__(self, requested, budget, what="tensor"):
        self.requested = requested
        self.budget = budget
        super().__init__(
            f"{what} needs {requested} compressed entries, budget is {budget}; "
            "reduce the order or the dimension"
        )


class ShapeError(MomentSpectraError, ValueError):
    """Operands have incompatible order or dimension."""


class ConfigError(MomentSpectraError, ValueError):
    """Invalid configuration or model parameters."""


class SingularSystemError(MomentSpectraError, ArithmeticError):
    """A linear system is too ill-conditioned to solve reliably."""


class SampleSizeOverflow(MomentSpectraError, OverflowError):
    """A requested sample size does not fit in a 64-bit integer."""


class FormatError(MomentSpectraError, ValueError):
    """A binary or JSON file does not match the expected layout."""
