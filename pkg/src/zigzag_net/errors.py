"""Exception types shared across the package."""


class ZigZagError(Exception):
    """Base class for all package errors."""


class FieldMismatch(ZigZagError, TypeError):
    pass


class DivisionByZero(ZigZagError, ZeroDivisionError):
    pass


class InvalidField(ZigZagError, ValueError):
    pass


class EmptyQueue(ZigZagError, ValueError):
    pass


class OffsetTooLarge(ZigZagError, ValueError):
    pass


class InconsistentSystem(ZigZagError, ArithmeticError):
    """Collision records admit no common solution (a record is corrupted)."""


class InvalidProbability(ZigZagError, ValueError):
    pass


class InvalidRate(ZigZagError, ValueError):
    pass


class NotFound(ZigZagError, KeyError):
    pass


class Diverges(ZigZagError, ArithmeticError):
    """An expected value is infinite (some stage has zero success probability)."""


class NotAchievable(ZigZagError, ValueError):
    pass


class HorizonExceeded(ZigZagError, RuntimeError):
    def __init__(self, message: str, unfinished: int = 0):
        super().__init__(message)
        self.unfinished = unfinished


class ConfigError(ZigZagError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line

    def __str__(self) -> str:
        msg = super().__str__()
        return f"line {self.line}: {msg}" if self.line is not None else msg
