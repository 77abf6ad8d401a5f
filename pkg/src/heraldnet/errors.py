"""Exception types shared across the package."""


class HeraldNetError(Exception):
    """Base class for all package errors."""


class ShapeError(HeraldNetError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(HeraldNetError, ValueError):
    """A caller violated an operation's contract (wrong rank, empty mask, ...)."""


class ConfigError(HeraldNetError, ValueError):
    """A configuration value is outside its legal range."""


class NumericalError(HeraldNetError, FloatingPointError):
    """A NaN or Inf was produced, or training diverged."""


class DataValidationError(HeraldNetError, ValueError):
    """A dataset file or structure failed validation."""


class DegenerateNodeError(DataValidationError):
    """A hypernode is incident to no hyperedge, so its degree is zero."""
