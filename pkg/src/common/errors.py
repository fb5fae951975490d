"""
errors.py
---------
Exception hierarchy shared by the scenario, channel, solver and CLI layers.
"""


class EEError(Exception):
    """Base class for every error raised by the toolkit."""


class ScenarioError(EEError, ValueError):
    """Invalid scenario input."""


class ScenarioParseError(ScenarioError):
    """
    A scenario or fading file could not be parsed.

    Args:
        message (str): Description of the problem.
        line (int | None): 1-based line number, when known.
        key (str | None): Offending key, when known.
    """

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ScenarioValidationError(ScenarioError):
    """A parsed value violates an invariant; `field` names it."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ChannelError(EEError, ValueError):
    """Monte Carlo precondition violated."""


class SolverError(EEError):
    """Base class for optimizer failures."""


class InfeasibleError(SolverError):
    """No operating point satisfies the constraints."""


class NonConvergenceError(SolverError):
    """The iteration budget ran out; `trace` holds the recorded states."""

    def __init__(self, message, trace=None):
        self.trace = list(trace or [])
        super().__init__(message)
