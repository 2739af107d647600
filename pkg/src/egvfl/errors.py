"""Exception types raised across the package."""


class EgvflError(Exception):
    """Base class for all package errors."""


class DimensionError(EgvflError, ValueError):
    pass


class NonFiniteError(EgvflError, ValueError):
    pass


class EmptyInput(EgvflError, ValueError):
    pass


class ParseError(EgvflError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PartitionError(EgvflError, ValueError):
    pass


class UnsupportedProx(EgvflError, NotImplementedError):
    pass


class UnsupportedConjugate(EgvflError, NotImplementedError):
    pass


class DegenerateProblem(EgvflError, ValueError):
    pass


class MissingConstant(EgvflError, KeyError):
    pass


class InvalidKey(EgvflError, ValueError):
    pass


class ConfigError(EgvflError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DivergenceError(EgvflError, FloatingPointError):
    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)


class SingularOracle(EgvflError, ArithmeticError):
    pass


class FormatError(EgvflError, ValueError):
    pass
