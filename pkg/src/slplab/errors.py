"""Exception types shared across the package."""


class SlpError(Exception):
    """Base class for all package errors."""


class UnsupportedOrder(SlpError):
    """Constellation order not valid for the requested modulation kind."""


class DimensionMismatch(SlpError):
    """Operand shapes do not agree."""


class ZeroSymbol(SlpError):
    """A data symbol is zero where a division by it is required."""


class DegenerateBasis(SlpError):
    """Symbol decomposition basis is degenerate for this constellation."""


class SingularDecomposition(SlpError):
    """The 2x2 component-gain system is singular."""


class MetricMismatch(SlpError):
    """CI metric not applicable to the given constellation kind."""


class OutOfRange(SlpError):
    """Scalar argument outside its admissible interval."""


class SingularChannel(SlpError):
    """Channel matrix too ill-conditioned for inversion."""


class ZeroDirection(SlpError):
    """Matched-filter direction vanished (H^H s = 0)."""


class NotConverged(SlpError):
    """Fixed-point iteration hit its cap without meeting tolerance."""


class InfeasibleTargets(SlpError):
    """Power-minimization targets admit no finite-power solution."""


class SolverFailure(SlpError):
    """An optimization kernel returned a non-optimal status."""


class ConfigError(SlpError):
    """Invalid simulation configuration; names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
