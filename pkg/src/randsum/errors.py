"""Exception hierarchy shared by all modules."""


class RandsumError(Exception):
    """Base class for package errors."""


class DomainError(RandsumError, ValueError):
    """Input outside the region where an operation is defined."""


class InfeasibleError(DomainError):
    """Monte Carlo request cannot resolve the requested tail levels."""

    def __init__(self, message, feasible=None):
        super().__init__(message)
        self.feasible = feasible


class NumericalError(RandsumError, ArithmeticError):
    """Quadrature, bracketing or root finding failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(RandsumError):
    """Invalid experiment configuration."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
