"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent objects or parameters: grid mismatches, missing tower
    orders, insufficient dealiasing padding, invalid run configs."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation
    (negative time, negative mollification scale, negative counterterm...)."""


class BlowUpError(RuntimeError):
    """Raised when a trajectory leaves the sanity envelope (NaN or
    sup-norm above the blow-up threshold).  Carries the time stamp and the
    last valid state so callers can report diagnostics."""

    def __init__(self, t: float, last_state=None):
        super().__init__(f"solution blew up at t={t:.6g}")
        self.t = t
        self.last_state = last_state


class NonContractionError(RuntimeError):
    """Picard iteration residual grew: the requested horizon is too large
    for the fixed-point map to contract."""
