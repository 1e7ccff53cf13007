"""Exception hierarchy shared by the solvers and the command line tool."""

from __future__ import annotations


class FoliateError(Exception):
    """Base class for all errors raised by :mod:`foliate`."""


class GapConditionError(FoliateError, ValueError):
    """The spectral constants do not satisfy a required gap condition."""


class DivergenceError(FoliateError, ArithmeticError):
    """A trajectory or an iterate became non-finite or exceeded the guard."""

    def __init__(self, message: str, *, iteration: int | None = None,
                 index: int | None = None, side: str | None = None):
        super().__init__(message)
        self.iteration = iteration
        self.index = index
        self.side = side


class IterationLimitError(FoliateError, RuntimeError):
    """An iteration did not reach its tolerance within the allowed count."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class InfeasibleTailError(FoliateError, ValueError):
    """No tail length satisfies the truncation bound; pass ``n_points`` explicitly."""


class DegenerateSequenceError(FoliateError, ZeroDivisionError):
    """Aitken extrapolation is undefined for the supplied iterates."""


class ConfigError(FoliateError, ValueError):
    """An experiment configuration file is malformed or inconsistent."""
