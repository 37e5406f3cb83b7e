"""Exception types shared across the package."""

from __future__ import annotations


class CausalOrderError(Exception):
    """Base class for all package errors."""


class CyclicGraphError(CausalOrderError):
    """Raised when an operation requires an acyclic graph but found a cycle."""

    def __init__(self, message: str, cycle: tuple[str, ...] = ()):
        super().__init__(message)
        self.cycle = tuple(cycle)


class UnorderedNodeError(CausalOrderError):
    """An order is missing a node that the operation needs ranked."""


class ShapeMismatchError(CausalOrderError):
    """Two graphs were expected to share a node set but do not."""


class ParseError(CausalOrderError):
    """A text document could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CptRowSumError(ParseError):
    """A conditional probability table row does not sum to one."""


class CyclicParentsError(ParseError):
    """The parent structure of a network document contains a cycle."""


class UnknownGraphError(CausalOrderError):
    """Requested bundled graph name is not recognised."""


class DegenerateDataError(CausalOrderError):
    """Sample data is unusable for testing (e.g. a constant column)."""


class SingularDesignError(CausalOrderError):
    """The regression design matrix is rank deficient."""


class MissingColumnError(CausalOrderError):
    """A required column is absent from the sample table."""


class EndpointError(CausalOrderError):
    """The remote expert endpoint failed or was unreachable."""


class UnparseableAnswerError(CausalOrderError):
    """An expert response could not be parsed after the allowed retries."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class SessionClosedError(CausalOrderError):
    """The annotation session was closed before the query was answered."""


class AnswerTimeoutError(CausalOrderError):
    """No answer arrived within the configured timeout."""


class OrientationCycleError(CausalOrderError):
    """Order-based orientation produced a directed cycle.

    Carries the oriented graph so the caller can decide what to do with it.
    """

    def __init__(self, message: str, result, cycle: tuple[str, ...]):
        super().__init__(message)
        self.result = result
        self.cycle = tuple(cycle)


class SimAssertionError(CausalOrderError):
    """A simulation's built-in theoretical check failed."""
