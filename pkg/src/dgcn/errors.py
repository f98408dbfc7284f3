"""Exception types raised across the package."""


class DGCNError(Exception):
    """Base class for all package errors."""


class ValidationError(DGCNError, ValueError):
    pass


class ParseError(ValidationError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class ShapeError(ValidationError):
    pass


class ConvergenceError(DGCNError, RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class NumericError(DGCNError, ArithmeticError):
    pass
