"""Exception hierarchy shared by the services, the CLI and the HTTP routers."""


class ProsumerQaoaError(Exception):
    """Base class for every error raised by the package."""


class InvalidProblemError(ProsumerQaoaError):
    """Raised when a problem instance violates its invariants."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("Invalid problem: " + "; ".join(violations))


class DimensionMismatchError(ProsumerQaoaError):
    """Raised when a schedule, bitstring or state does not match the expected size."""


class SizeLimitExceededError(ProsumerQaoaError):
    """Raised when an exhaustive scan or statevector would exceed the configured limit."""


class MetricsContractError(ProsumerQaoaError):
    """Raised when success metrics are requested on empty counts or inconsistent reference sets."""


class NoQuadraticTermsError(ProsumerQaoaError):
    """Raised when no coupled pair is left to eliminate; RQAOA switches to its classical finish."""
