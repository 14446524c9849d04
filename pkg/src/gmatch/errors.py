"""Exception hierarchy shared by all gmatch modules."""


class GraphMatchingError(ValueError):
    """Base class for all errors raised by gmatch."""


class InvalidProblemError(GraphMatchingError):
    """Problem construction violated a structural invariant."""


class InvalidLabelingError(GraphMatchingError):
    """A labeling references a node-label pair that is not a candidate."""


class InfeasibleError(GraphMatchingError):
    """A labeling violates label uniqueness, or no feasible solution exists."""


class SizeError(GraphMatchingError):
    """An operation was asked to exceed its enumeration or memory budget."""


class PreconditionError(GraphMatchingError):
    """Input does not satisfy an operation's precondition."""


class ParseError(GraphMatchingError):
    """Malformed dd input. ``line`` is 1-based, or None for whole-file errors."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)
