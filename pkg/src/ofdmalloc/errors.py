"""Exception types shared across the package."""


class OfdmAllocError(Exception):
    """Base class for all package errors."""


class InstanceFormatError(OfdmAllocError, ValueError):
    """A problem-instance or allocation file is malformed.

    ``field`` points at the offending entry (e.g. ``gains[1][3]``), ``line``
    at the source line when the file could not even be parsed.
    """

    def __init__(self, message, field=None, line=None):
        if field is not None:
            message = f"{field}: {message}"
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.field = field
        self.line = line


class InfeasibleError(OfdmAllocError, RuntimeError):
    """Rate requirements cannot be met within the power budget."""

    def __init__(self, p_min, p_budget):
        super().__init__(
            f"infeasible: minimum required sum power {p_min!r} exceeds budget {p_budget!r}"
        )
        self.p_min = p_min
        self.p_budget = p_budget


class UnreachableUserError(OfdmAllocError, ValueError):
    """A user with a positive rate requirement has no usable carrier."""

    def __init__(self, user):
        super().__init__(
            f"user {user + 1} has a positive rate requirement but no positive channel gain"
        )
        self.user = user


class ConvergenceError(OfdmAllocError, RuntimeError):
    """An iterative stage failed to reach its tolerance; carries the trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
