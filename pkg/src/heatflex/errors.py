"""Exception types shared across the package."""


class HeatflexError(Exception):
    """Base class for package errors."""


class DataFormatError(HeatflexError, ValueError):
    """A data file violates its documented schema; message carries row/column context."""


class SeriesGapError(DataFormatError):
    """An hourly series has missing timestamps; message lists the first gaps."""


class ConfigError(HeatflexError, ValueError):
    """A configuration file or key-value pair is invalid."""


class BoundCrossingError(HeatflexError, ValueError):
    """Quantile-tightened storage bounds cross (upper < lower); names the interval."""


class InfeasibleError(HeatflexError, RuntimeError):
    """The linear program has no feasible point."""

    def __init__(self, message, violated_rows=None):
        super().__init__(message)
        self.violated_rows = list(violated_rows or [])


class UnboundedError(HeatflexError, RuntimeError):
    """The linear program is unbounded (a modeling bug: every variable is boxed)."""


class SolverError(HeatflexError, RuntimeError):
    """The solver failed to converge or was misused."""
