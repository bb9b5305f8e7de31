"""Exception hierarchy shared across the pipeline.

Exit-code mapping used by the CLI: usage errors exit 2, data validation
errors exit 3, numeric divergence exits 4.
"""


class EnerdetectError(Exception):
    """Base class for all library errors."""


class SchemaError(EnerdetectError):
    """Input file does not match the expected column schema."""


class ValidationError(EnerdetectError):
    """Data fails a structural invariant (duplicates, insufficient rows, ...)."""


class DegenerateSeriesError(EnerdetectError):
    """A statistic cannot be formed (constant residuals, empty input, ...)."""


class DivergenceError(EnerdetectError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")
