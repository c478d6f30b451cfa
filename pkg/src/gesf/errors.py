"""Exception hierarchy shared by every gesf module."""


class GesfError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GesfError, ValueError):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class ValidationError(GesfError, ValueError):
    pass


class ConfigurationError(GesfError, ValueError):
    pass


class NumericError(GesfError, ArithmeticError):
    pass


class TrainingError(GesfError, RuntimeError):
    pass


class UsageError(GesfError, RuntimeError):
    pass


class PreconditionError(GesfError, ValueError):
    pass


class ResourceError(GesfError, RuntimeError):
    pass
