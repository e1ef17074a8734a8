"""Exception types raised by the filters and harness."""


class ConfigurationError(ValueError):
    """Raised for unknown strategy tags, invalid particle counts and similar."""


class DegenerateWeightsError(RuntimeError):
    """Every particle received zero weight at time ``t``."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"all importance weights are zero at t={t}")


class InstanceTooLargeError(ValueError):
    """Exhaustive enumeration was requested for too many model sequences."""
