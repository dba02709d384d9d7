"""Exception types raised across the package."""

from __future__ import annotations


class InvalidInputError(ValueError):
    """Input data or arguments violate a documented precondition."""


class DomainError(ValueError):
    """A numeric argument lies outside the domain of a function."""


class UndefinedCorrelationError(ValueError):
    """A correlation was requested for a sample with zero rank variance."""


class CapacityError(RuntimeError):
    """An exhaustive enumeration would exceed the caller's limit."""

    def __init__(self, count: int, limit: int):
        super().__init__(f"{count} distinct arrangements exceed the limit of {limit}")
        self.count = count
        self.limit = limit


class InfeasibleError(RuntimeError):
    """No candidate satisfies the required constraint."""


class DatasetParseError(ValueError):
    """A dataset file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line
