"""Exception types shared across the package."""


class DomainError(ValueError):
    """Invalid argument or configuration for an operation."""


class FormatError(ValueError):
    """Malformed input file."""


class NumericalError(ArithmeticError):
    """Linear algebra broke down beyond the configured safeguards."""


class ResourceError(RuntimeError):
    """A requested enumeration would exceed its size guard."""
