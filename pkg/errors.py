from typing import Optional


class SkewFSDEError(Exception):
    """Base class for every error raised by this project"""


class DomainError(SkewFSDEError, ValueError):
    """An argument lies outside the domain where an operation is defined"""


class YoungConditionError(DomainError):
    """Hölder exponents of integrand and integrator do not sum above 1"""


class HypothesisError(DomainError):
    """Parameters violate the hypotheses of a bound being verified"""


class NumericalInstabilityError(SkewFSDEError, ArithmeticError):
    def __init__(self, message: str, pivot: Optional[int] = None):
        """
        Raised when a factorization breaks down in floating point.

        Args:
            message: Human readable description
            pivot: 1-based index of the failing pivot, when known
        """
        super().__init__(message)
        self.pivot = pivot


class CirculantEmbeddingError(NumericalInstabilityError):
    """The circulant embedding has a negative eigenvalue beyond tolerance"""


class ConfigError(SkewFSDEError):
    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        """
        Raised for unreadable or invalid run configuration.

        Args:
            message: Description of the problem
            line: 1-based line number in the config file, if any
            field: Name of the offending field, if any
        """
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class VerificationError(SkewFSDEError):
    """A result failed a check that must hold before it is written"""
