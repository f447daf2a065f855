"""Exception types shared across the package."""


class QFluidError(Exception):
    """Base class for all package errors."""


class NonFiniteFieldError(QFluidError):
    """A field contains NaN or Inf values where finite data is required."""

    def __init__(self, name: str, n_bad: int, first_index: int):
        self.name = name
        self.n_bad = n_bad
        self.first_index = first_index
        super().__init__(
            f"field '{name}' has {n_bad} non-finite value(s), first at flat index {first_index}"
        )


class GridMismatchError(QFluidError):
    """Operands live on different grids."""


class GridError(QFluidError):
    """Invalid grid construction."""


class StabilityError(QFluidError):
    """A requested time step violates the stability bound of the scheme."""


class UnitarityError(QFluidError):
    """Wave-function norm drifted beyond the allowed tolerance."""


class EigensolverError(QFluidError):
    """Eigenpair computation failed or did not reach the requested residual."""


class DomainSizeError(QFluidError):
    """Requested dynamics would leave the periodic domain (e.g. pointer shift)."""


class ConditionalUndefinedError(QFluidError):
    """Conditional wave function requested along a slice of negligible norm."""


class ConfigError(QFluidError):
    """Invalid experiment or solver configuration."""
