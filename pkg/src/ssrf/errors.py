"""Exception types shared across the package."""


class SsrfError(Exception):
    """Base class for all package-specific errors."""


class DegenerateDataError(SsrfError, ValueError):
    """Sample data cannot support the requested estimate (duplicates, zeros)."""


class InsufficientPairsError(SsrfError, ValueError):
    """Too few point pairs fall inside a kernel support."""

    def __init__(self, bandwidth, count, required):
        self.bandwidth = bandwidth
        self.count = count
        self.required = required
        super().__init__(
            f"only {count} pair(s) contribute at bandwidth {bandwidth:g} "
            f"(need >= {required})"
        )


class PermissibilityError(SsrfError, ValueError):
    """Parameter set violates spectral-density positivity on the band."""


class QuadratureError(SsrfError, RuntimeError):
    """Numerical integration failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class FactorizationError(SsrfError, RuntimeError):
    """Matrix factorization failed."""

    def __init__(self, message, pivot=None):
        self.pivot = pivot
        super().__init__(message)
