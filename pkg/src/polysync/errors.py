"""Exception types raised across the package."""


class PolysyncError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(PolysyncError, ValueError):
    """Operands have non-conformal or otherwise invalid shapes."""


class SizeError(PolysyncError, ValueError):
    """A construction would exceed a hard size budget (e.g. vertex explosion)."""


class NumericalError(PolysyncError, RuntimeError):
    """An iterative numerical routine failed to converge."""


class DivergenceError(PolysyncError, RuntimeError):
    """A simulated trajectory left the finite / bounded regime."""


class RichnessError(PolysyncError, ValueError):
    """Collected data is not rich enough (stacked input-state matrix rank deficient)."""


class TopologyError(PolysyncError, ValueError):
    """Communication graph violates the leader-rooted spanning tree requirement."""


class RegulatorError(PolysyncError, RuntimeError):
    """The tracking-manifold (regulator) equations admit no solution."""


class SynthesisError(PolysyncError, RuntimeError):
    """Feedback gain synthesis failed (infeasible or certificate mismatch)."""


class ObserverDesignError(PolysyncError, RuntimeError):
    """No observer gain achieving the requested contraction was found."""


class OracleUnavailableError(PolysyncError, RuntimeError):
    """A ground-truth-dependent check was requested without retained ground truth."""


class IntegrityError(PolysyncError, RuntimeError):
    """Stored artifacts are missing, malformed, or mutually inconsistent."""
