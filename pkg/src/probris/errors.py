"""Exception types raised by the library."""


class ProbRisError(Exception):
    """Base class for all library errors."""


class DomainError(ProbRisError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class PreconditionError(ProbRisError, ValueError):
    """An input violates a documented precondition."""


class SizeError(ProbRisError, ValueError):
    """An enumeration would exceed its configured cap."""


class InfeasibleError(ProbRisError, ValueError):
    """A configuration admits no feasible operating point."""
