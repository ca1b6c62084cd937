"""Exception types shared across the package."""


class PTQRMError(Exception):
    """Base class for all package errors."""


class DimensionError(PTQRMError, ValueError):
    """Operands have incompatible shapes or the wrong representation."""


class SolverError(PTQRMError):
    """Eigendecomposition failed or violated its residual contract."""


class SearchError(PTQRMError):
    """A root or exceptional-point search found no sign change."""


class IntegrationError(PTQRMError):
    """Time integration produced non-finite values or broke an invariant."""

    def __init__(self, message, last_valid_time=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time
