"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class SubredError(Exception):
    """Base class; ``loc`` is an optional ``(line, column)`` source location."""

    def __init__(self, message: str, loc: tuple[int, int] | None = None):
        super().__init__(message)
        self.message = message
        self.loc = loc

    def __str__(self) -> str:
        if self.loc:
            return f"{self.loc[0]}:{self.loc[1]}: {self.message}"
        return self.message


class ParseError(SubredError):
    def __init__(self, message: str, loc=None, expected: tuple[str, ...] = ()):
        if expected:
            message = f"{message} (expected {', '.join(expected)})"
        super().__init__(message, loc)
        self.expected = expected


class SignatureError(SubredError):
    pass


class ArityMismatch(SignatureError):
    pass


class IncoherentInjections(SignatureError):
    pass


class NoMaximumConstructor(SignatureError):
    pass


class CyclicOrder(SignatureError):
    pass


class TransparencyViolation(SignatureError):
    pass


class NonFlatResult(SignatureError):
    pass


class UndeclaredSymbol(SignatureError):
    pass


class NonIdempotent(SubredError):
    pass


class FormViolation(SubredError):
    """A system or term vector lacks the linearity/acyclicity the operation needs."""


class PreconditionViolated(SubredError):
    pass
