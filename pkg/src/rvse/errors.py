"""Exception hierarchy. The CLI maps each family to an exit code."""


class RVSEError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RVSEError, ValueError):
    """Malformed Hamiltonian, state, grid or config text."""


class NumericGuardError(RVSEError):
    """A numeric precondition was violated (dimension, sector, norm)."""


class DimensionError(NumericGuardError, ValueError):
    pass


class HermiticityError(NumericGuardError, ValueError):
    pass


class SectorError(NumericGuardError):
    """Requested particle-number sector is empty or ill-defined."""


class AnnihilationError(NumericGuardError):
    """A Chebyshev state (or attachment/removal state) has vanishing norm."""
