"""Exception types shared across the package."""


class FlowcutError(Exception):
    """Base class for all package-specific errors."""


class FormatError(FlowcutError):
    """Array file is malformed (bad magic, header, or layout)."""


class UnsupportedDtype(FlowcutError):
    """Array file uses a dtype outside the supported set."""


class ManifestError(FlowcutError):
    """Dataset directory does not satisfy the expected layout."""


class ShapeError(FlowcutError):
    """Operands have inconsistent shapes or geometry."""


class DegenerateFeature(FlowcutError):
    """A feature vector has zero norm, cosine similarity is undefined."""


class ConvergenceError(FlowcutError):
    """Eigensolver failed to reach the requested residual tolerance."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class DegeneratePartition(FlowcutError):
    """A graph bipartition has an empty side."""


class ArgumentError(FlowcutError):
    """Invalid argument value (empty list, even ensemble count, ...)."""


class NumericalError(FlowcutError):
    """A numerical routine produced non-finite values."""


class RoundError(FlowcutError):
    """Self-training round preconditions are not met."""


class ExchangeError(FlowcutError):
    """External trainer exchange received missing or invalid files."""

    def __init__(self, message, offenders=None):
        super().__init__(message)
        self.offenders = list(offenders) if offenders else []


class PairingError(FlowcutError):
    """Flow pairing needs at least two frames."""
