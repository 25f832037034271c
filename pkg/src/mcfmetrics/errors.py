"""Exception types raised across the package.

Every error carries a stable CLI exit code so the command line front end can
map failures without string matching.
"""

from __future__ import annotations


class McfError(Exception):
    """Base class for all package errors."""

    exit_code = 1


# -- ingestion (exit code 1) -------------------------------------------------


class IngestError(McfError, ValueError):
    exit_code = 1


class MalformedRow(IngestError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MissingCensoringRow(IngestError):
    def __init__(self, player_id: str) -> None:
        super().__init__(
            f"player {player_id!r} has no censored row and no global cutoff was given"
        )
        self.player_id = player_id


class MultipleCensoringRows(IngestError):
    def __init__(self, player_id: str, count: int) -> None:
        super().__init__(f"player {player_id!r} has {count} censored rows")
        self.player_id = player_id


class MixedTimeBases(IngestError):
    def __init__(self, player_id: str) -> None:
        super().__init__(
            f"player {player_id!r} mixes timestamp-only and time-only rows"
        )
        self.player_id = player_id


class MalformedDuration(IngestError):
    pass


class MalformedMoney(IngestError):
    pass


class NegativeElapsed(IngestError):
    pass


class CutoffBeforeFirstEvent(IngestError):
    pass


# -- history validation (exit code 2) ----------------------------------------


class HistoryValidationError(McfError, ValueError):
    exit_code = 2

    def __init__(self, player_id: str, index: int | None, reason: str) -> None:
        where = f"player {player_id!r}"
        if index is not None:
            where += f", event {index}"
        super().__init__(f"{where}: {reason}")
        self.player_id = player_id
        self.index = index


class EventAfterCensoring(HistoryValidationError):
    pass


class UnsortedEvents(HistoryValidationError):
    pass


class NegativeValue(HistoryValidationError):
    pass


class NegativeTime(HistoryValidationError):
    pass


class DuplicatePlayer(HistoryValidationError):
    pass


class MissingValue(HistoryValidationError):
    pass


# -- estimation ---------------------------------------------------------------


class EmptyCohort(McfError, ValueError):
    exit_code = 3


class NoObservablePlayers(McfError, ValueError):
    exit_code = 3


class EmptyInput(McfError, ValueError):
    exit_code = 3


class BeyondObservationWindow(McfError, ValueError):
    exit_code = 4


class WindowTooShort(McfError, ValueError):
    exit_code = 4


class NoCommonWindow(McfError, ValueError):
    exit_code = 4


class DegenerateVariance(McfError, ArithmeticError):
    """Score statistic is nonzero but its variance estimate is zero.

    The offending statistic is kept on the exception so callers can still
    report it.
    """

    exit_code = 5

    def __init__(self, statistic: float, labels: tuple[str, str]) -> None:
        super().__init__(
            f"variance of the score statistic is zero while U = {statistic:g} "
            f"({labels[0]} vs {labels[1]}); p-value undefined"
        )
        self.statistic = statistic
        self.labels = labels


class NegativeStatistic(McfError, ValueError):
    exit_code = 5


class InvalidParams(McfError, ValueError):
    exit_code = 6
