"""Domain types for censored per-player event histories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicatePlayer,
    EmptyCohort,
    EventAfterCensoring,
    NegativeTime,
    NegativeValue,
    UnsortedEvents,
)


class EventKind(str, Enum):
    SESSION = "session"
    PURCHASE = "purchase"


@dataclass(frozen=True, slots=True)
class EventRecord:
    """One timestamped event.

    ``value`` is the session length in seconds or the purchase amount in
    currency units. Sessions read from files without a length carry ``None``.
    """

    time_since_install: float
    kind: EventKind
    value: float | None = None


@dataclass(frozen=True, slots=True)
class PlayerHistory:
    """Events of one player, observed on ``[0, censoring_time]``.

    ``install_time`` is the calendar time of the time origin when the history
    was built from timestamped rows; it is only needed for calendar tables.
    """

    player_id: str
    events: tuple[EventRecord, ...]
    censoring_time: float
    install_time: datetime | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))

    def observable(self, t: float) -> bool:
        return t <= self.censoring_time

    def of_kind(self, kind: EventKind | str) -> list[EventRecord]:
        kind = EventKind(kind)
        return [e for e in self.events if e.kind is kind]


def validate_history(history: PlayerHistory) -> PlayerHistory:
    """Check the structural invariants of ``history`` and return it unchanged.

    Raises
    ------
    NegativeTime
        If the censoring time or an event time is negative or not finite.
    UnsortedEvents
        If event times decrease.
    EventAfterCensoring
        If an event lies strictly after the censoring time. An event exactly
        at the censoring time is observable.
    NegativeValue
        If an event value is negative.
    """
    pid = history.player_id
    tau = history.censoring_time
    if not (math.isfinite(tau) and tau >= 0):
        raise NegativeTime(pid, None, f"censoring time {tau!r} must be finite and >= 0")
    previous = -math.inf
    for i, event in enumerate(history.events):
        t = event.time_since_install
        if not (math.isfinite(t) and t >= 0):
            raise NegativeTime(pid, i, f"event time {t!r} must be finite and >= 0")
        if t < previous:
            raise UnsortedEvents(pid, i, f"event time {t} precedes {previous}")
        if t > tau:
            raise EventAfterCensoring(pid, i, f"event time {t} is after censoring time {tau}")
        if event.value is not None and not (event.value >= 0):
            raise NegativeValue(pid, i, f"event value {event.value!r} is negative")
        previous = t
    return history


@dataclass(frozen=True, slots=True)
class CohortSample:
    """A labelled set of player histories, treated as i.i.d. draws."""

    label: str
    players: tuple[PlayerHistory, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.players, tuple):
            object.__setattr__(self, "players", tuple(self.players))
        if not self.players:
            raise EmptyCohort(f"cohort {self.label!r} has no players")
        seen: set[str] = set()
        for p in self.players:
            if p.player_id in seen:
                raise DuplicatePlayer(p.player_id, None, f"duplicate player in cohort {self.label!r}")
            seen.add(p.player_id)

    @classmethod
    def validated(cls, label: str, players: Iterable[PlayerHistory]) -> CohortSample:
        return cls(label, tuple(validate_history(p) for p in players))

    def __len__(self) -> int:
        return len(self.players)

    @property
    def max_censoring_time(self) -> float:
        return max(p.censoring_time for p in self.players)

    def subset(self, label: str, indices: Sequence[int]) -> CohortSample:
        return CohortSample(label, tuple(self.players[i] for i in indices))


@dataclass(frozen=True)
class PlayerCosts:
    """Costs of one player after a metric transform, with its censoring time."""

    player_id: str
    times: np.ndarray
    costs: np.ndarray
    censoring_time: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float).reshape(-1)
        costs = np.asarray(self.costs, dtype=float).reshape(-1)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "costs", costs)
        if times.shape != costs.shape:
            raise ValueError(f"player {self.player_id!r}: times and costs differ in length")
        if times.size:
            if np.any(np.diff(times) < 0):
                raise UnsortedEvents(self.player_id, None, "cost times are not sorted")
            if times[-1] > self.censoring_time:
                raise EventAfterCensoring(
                    self.player_id,
                    int(np.argmax(times > self.censoring_time)),
                    f"cost time after effective censoring time {self.censoring_time}",
                )


@dataclass(frozen=True)
class CostStream:
    """Per-player cost streams for a cohort, the input of the estimator."""

    label: str
    players: tuple[PlayerCosts, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not isinstance(self.players, tuple):
            object.__setattr__(self, "players", tuple(self.players))

    def __len__(self) -> int:
        return len(self.players)

    def scaled(self, factor: float) -> CostStream:
        return CostStream(
            self.label,
            tuple(
                PlayerCosts(p.player_id, p.times, p.costs * factor, p.censoring_time)
                for p in self.players
            ),
        )

    def flatten(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(event_times, event_costs, event_player, censoring_times)``.

        ``event_player`` indexes into ``self.players``.
        """
        sizes = [p.times.size for p in self.players]
        total = sum(sizes)
        times = np.empty(total)
        costs = np.empty(total)
        owner = np.repeat(np.arange(len(self.players)), sizes)
        pos = 0
        for p, n in zip(self.players, sizes):
            times[pos : pos + n] = p.times
            costs[pos : pos + n] = p.costs
            pos += n
        tau = np.array([p.censoring_time for p in self.players], dtype=float)
        return times, costs, owner, tau
