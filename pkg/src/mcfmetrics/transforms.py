"""Metric transforms (histories to cost streams) and rate derivations."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from enum import Enum
from typing import IO, Hashable

import numpy as np

from .errors import MissingValue, WindowTooShort
from .events import CohortSample, CostStream, EventKind, PlayerCosts
from .mcf import McfCurve, compute_mcf


class MetricKind(str, Enum):
    SESSION_COUNT = "sessions"
    PLAYTIME_SECONDS = "playtime"
    DISTINCT_DAYS = "distinct-days"
    PURCHASE_COUNT = "purchases"
    LIFETIME_VALUE = "ltv"


_EVENT_RULES = {
    MetricKind.SESSION_COUNT: (EventKind.SESSION, False),
    MetricKind.PLAYTIME_SECONDS: (EventKind.SESSION, True),
    MetricKind.PURCHASE_COUNT: (EventKind.PURCHASE, False),
    MetricKind.LIFETIME_VALUE: (EventKind.PURCHASE, True),
}


def to_cost_stream(sample: CohortSample, kind: MetricKind | str) -> CostStream:
    """Map every history of ``sample`` to its cost stream for ``kind``.

    Count metrics put a unit cost on each matching event, playtime puts the
    whole session length at the session start, and lifetime value puts the
    purchase amount at the purchase time.
    """
    kind = MetricKind(kind)
    if kind is MetricKind.DISTINCT_DAYS:
        return distinct_days_costs(sample)
    event_kind, use_value = _EVENT_RULES[kind]
    players = []
    for p in sample.players:
        times, costs = [], []
        for i, e in enumerate(p.events):
            if e.kind is not event_kind:
                continue
            if use_value:
                if e.value is None:
                    raise MissingValue(p.player_id, i, f"{e.kind.value} has no value for metric {kind.value}")
                costs.append(e.value)
            else:
                costs.append(1.0)
            times.append(e.time_since_install)
        players.append(PlayerCosts(p.player_id, times, costs, p.censoring_time))
    return CostStream(sample.label, tuple(players))


def distinct_days_costs(sample: CohortSample) -> CostStream:
    """Unit cost per day played, on the integer day grid.

    A session in day bucket ``b = floor(t)`` marks day ``b`` as played; the
    cost is placed at discrete time ``b + 1``. The effective censoring time is
    ``floor(tau)``, so a day only counts once it has been observed in full.
    """
    players = []
    for p in sample.players:
        tau = float(math.floor(p.censoring_time))
        days = sorted(
            {math.floor(e.time_since_install) + 1 for e in p.events if e.kind is EventKind.SESSION}
        )
        times = [float(d) for d in days if d <= tau]
        players.append(PlayerCosts(p.player_id, times, [1.0] * len(times), tau))
    return CostStream(sample.label, tuple(players))


def mcf_for_metric(sample: CohortSample, kind: MetricKind | str, level: float = 0.95, *, clamp: bool = False) -> McfCurve:
    return compute_mcf(to_cost_stream(sample, kind), level, clamp=clamp)


def daily_rate(curve: McfCurve) -> list[tuple[int, float]]:
    """Per-day finite differences ``MCF(d) - MCF(d - 1)`` for ``d = 1..floor(max_time)``.

    Each difference is computed as the sum of the increments falling in
    ``(d - 1, d]``, which equals the difference of the step function but
    avoids subtracting two rounded running sums. On a distinct-days curve
    these are the classical retention rates.
    """
    if curve.max_time < 1:
        raise WindowTooShort(f"observation window {curve.max_time} is shorter than one day")
    last = int(math.floor(curve.max_time))
    edges = np.arange(0, last + 1, dtype=float)
    # bucket d holds times in (d - 1, d]
    bucket = np.searchsorted(edges, curve.times, side="left")
    rates = [0.0] * (last + 1)
    for b, inc in zip(bucket.tolist(), curve.increment.tolist()):
        if 1 <= b <= last:
            rates[b] += inc
    return [(d, rates[d]) for d in range(1, last + 1)]


class RetentionMode(str, Enum):
    SESSIONS = "sessions"
    DISTINCT_USERS = "users"


@dataclass(frozen=True)
class RetentionTable:
    """Cohort-by-day activity table.

    ``cells[r][c]`` is ``None`` for days outside cohort ``r``'s fully observed
    window (and for days before the cohort started).
    """

    cohort_keys: tuple[Hashable, ...]
    day_keys: tuple[Hashable, ...]
    dnu: tuple[int, ...]
    cells: tuple[tuple[int | None, ...], ...]
    mode: RetentionMode

    @property
    def dau(self) -> tuple[int, ...]:
        return tuple(
            sum(row[c] for row in self.cells if row[c] is not None)
            for c in range(len(self.day_keys))
        )

    @property
    def rates(self) -> tuple[tuple[float | None, ...], ...]:
        return tuple(
            tuple(None if v is None else v / n for v in row)
            for row, n in zip(self.cells, self.dnu)
        )

    def cell(self, cohort: Hashable, day: Hashable) -> int | None:
        return self.cells[self.cohort_keys.index(cohort)][self.day_keys.index(day)]


def _player_offsets(sample: CohortSample) -> tuple[list[float], date | None]:
    """Install position of each player on a shared day axis.

    With calendar install times the axis origin is midnight of the earliest
    install date; otherwise every player sits at offset 0.
    """
    installs = [p.install_time for p in sample.players]
    if all(t is None for t in installs):
        return [0.0] * len(installs), None
    if any(t is None for t in installs):
        raise ValueError("either all or none of the players need calendar install times")
    origin = min(t.date() for t in installs)
    base = datetime.combine(origin, datetime.min.time())
    return [(t - base).total_seconds() / 86400.0 for t in installs], origin


def retention_table(sample: CohortSample, mode: RetentionMode | str = RetentionMode.SESSIONS) -> RetentionTable:
    """Group players by acquisition day and count activity per day.

    Players are grouped by the day of their first event. With calendar
    install times, rows and columns are calendar dates; without them every
    player shares acquisition day 0 and columns are elapsed-day indices.
    A cohort's cell for a day is filled only when every player of the cohort
    was observed for that whole day.
    """
    mode = RetentionMode(mode)
    offsets, origin = _player_offsets(sample)

    acquisition: dict[int, list[int]] = defaultdict(list)
    for idx, off in enumerate(offsets):
        acquisition[math.floor(off)].append(idx)

    counts: dict[tuple[int, int], int] = defaultdict(int)
    window_end: dict[int, float] = {}
    for start, members in acquisition.items():
        window_end[start] = min(offsets[i] + sample.players[i].censoring_time for i in members)
        for i in members:
            days_seen: set[int] = set()
            for e in sample.players[i].events:
                if e.kind is not EventKind.SESSION:
                    continue
                day = math.floor(offsets[i] + e.time_since_install)
                if mode is RetentionMode.SESSIONS:
                    counts[start, day] += 1
                elif day not in days_seen:
                    days_seen.add(day)
                    counts[start, day] += 1

    starts = sorted(acquisition)
    complete = {s: math.floor(window_end[s]) - 1 for s in starts}
    last_day = max(complete.values())
    columns = list(range(starts[0], last_day + 1))
    cells = tuple(
        tuple(counts.get((s, d), 0) if s <= d <= complete[s] else None for d in columns)
        for s in starts
    )

    def key(d: int) -> Hashable:
        return d if origin is None else origin + timedelta(days=d)

    return RetentionTable(
        cohort_keys=tuple(key(s) for s in starts),
        day_keys=tuple(key(d) for d in columns),
        dnu=tuple(len(acquisition[s]) for s in starts),
        cells=cells,
        mode=mode,
    )


def write_retention_csv(table: RetentionTable, stream: IO[str], *, rates: bool = False) -> None:
    """Table layout: one row per cohort, DNU column, one column per day, DAU footer.

    With ``rates`` the cells are divided by DNU and the footer is omitted.
    """
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["start_day", "dnu"] + [str(d) for d in table.day_keys])
    body = table.rates if rates else table.cells
    for k, n, row in zip(table.cohort_keys, table.dnu, body):
        writer.writerow([str(k), n] + ["" if v is None else (repr(v) if rates else v) for v in row])
    if not rates:
        writer.writerow(["DAU", ""] + list(table.dau))
