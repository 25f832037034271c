"""Read and write player event logs in the delimited text layout.

The expected columns are ``id, n, timestamp, time, type, value`` with an
optional ``cohort`` column. Times are either calendar timestamps
(``YYYY-MM-DD HH:MM:SS``) or elapsed days since install; when timestamps are
used the first event of each player becomes the time origin.
"""

from __future__ import annotations

import csv
import io
import re
from collections import defaultdict
from dataclasses import dataclass, replace
from datetime import datetime
from typing import IO, Iterable, Mapping

from .errors import (
    CutoffBeforeFirstEvent,
    MalformedDuration,
    MalformedMoney,
    MalformedRow,
    MissingCensoringRow,
    MixedTimeBases,
    MultipleCensoringRows,
    NegativeElapsed,
)
from .events import CohortSample, EventKind, EventRecord, PlayerHistory, validate_history

SECONDS_PER_DAY = 86400.0
TIMESTAMP_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d")
ROW_TYPES = ("session", "purchase", "censored")

_DURATION = re.compile(r"^(?:(\d+):)?(\d+):(\d+(?:\.\d+)?)$")
_MONEY = re.compile(r"^[^\d,.\-+]*([+-]?\d+(?:[.,]\d*)?|[+-]?[.,]\d+)[^\d,.]*$")
_HEADER_ALIASES = {
    "id": "id",
    "player": "id",
    "player_id": "id",
    "n": "n",
    "seq": "n",
    "timestamp": "timestamp",
    "time": "time",
    "time_days": "time",
    "type": "type",
    "value": "value",
}


@dataclass(frozen=True, slots=True)
class RawRow:
    player_id: str
    seq: int | None
    timestamp: datetime | None
    time_days: float | None
    type_tag: str
    value_text: str
    cohort: str | None = None
    line: int = 0


@dataclass(frozen=True)
class IngestOptions:
    """Parsing options.

    ``cutoff`` synthesizes a censoring row for players that lack one; it
    only applies to timestamped players. ``cutoff_days`` does the same for
    players recorded in elapsed days.
    """

    label: str = "all"
    delimiter: str = ","
    cutoff: datetime | None = None
    cutoff_days: float | None = None
    cohort_column: str | None = None
    encoding: str = "utf-8"


def parse_duration(text: str) -> float:
    """Parse ``mm:ss`` or ``hh:mm:ss`` into seconds.

    >>> parse_duration("08:45")
    525.0
    """
    match = _DURATION.match(text.strip())
    if not match:
        raise MalformedDuration(f"cannot parse duration {text!r}")
    hours, minutes, seconds = match.groups()
    minutes_i, seconds_f = int(minutes), float(seconds)
    if seconds_f >= 60 or (hours is not None and minutes_i >= 60):
        raise MalformedDuration(f"duration field out of range in {text!r}")
    return (int(hours or 0) * 60 + minutes_i) * 60 + seconds_f


def format_duration(seconds: float) -> str:
    whole = int(seconds)
    frac = seconds - whole
    h, rem = divmod(whole, 3600)
    m, s = divmod(rem, 60)
    out = f"{h}:{m:02d}:{s:02d}"
    if frac:
        out += f"{frac:.9f}".lstrip("0").rstrip("0")
    return out


def parse_money(text: str) -> float:
    """Parse an amount such as ``1.09€``, ``$3``, or ``0,00079``."""
    match = _MONEY.match(text.strip())
    if not match:
        raise MalformedMoney(f"cannot parse amount {text!r}")
    amount = float(match.group(1).replace(",", "."))
    if amount < 0:
        raise MalformedMoney(f"negative amount {text!r}")
    return amount


def parse_timestamp(text: str) -> datetime:
    text = " ".join(text.split())
    for fmt in TIMESTAMP_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    raise ValueError(f"cannot parse timestamp {text!r}")


def _canonical_header(name: str) -> str:
    key = re.sub(r"\(.*?\)", "", name).strip().lower().replace(" ", "_")
    return _HEADER_ALIASES.get(key, key)


def read_rows(content: bytes | str | IO[str], options: IngestOptions = IngestOptions()) -> list[RawRow]:
    """Parse delimited text into :class:`RawRow` objects without grouping."""
    if isinstance(content, bytes):
        content = content.decode(options.encoding)
    stream = io.StringIO(content) if isinstance(content, str) else content
    reader = csv.reader(stream, delimiter=options.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow(1, "missing header row") from None
    columns = [_canonical_header(h) for h in header]
    cohort_key = _canonical_header(options.cohort_column) if options.cohort_column else "cohort"
    index = {name: i for i, name in enumerate(columns)}
    if "id" not in index or "type" not in index:
        raise MalformedRow(1, "header must name at least the id and type columns")
    if "timestamp" not in index and "time" not in index:
        raise MalformedRow(1, "header must name a timestamp or time column")
    if options.cohort_column and cohort_key not in index:
        raise MalformedRow(1, f"cohort column {options.cohort_column!r} not found")

    def cell(fields: list[str], name: str) -> str:
        i = index.get(name)
        return fields[i].strip() if i is not None and i < len(fields) else ""

    rows = []
    for line, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) > len(columns):
            raise MalformedRow(line, f"expected {len(columns)} fields, got {len(fields)}")
        pid = cell(fields, "id")
        if not pid:
            raise MalformedRow(line, "empty id")
        tag = cell(fields, "type").lower()
        if tag not in ROW_TYPES:
            raise MalformedRow(line, f"unknown type {tag!r}")
        value = cell(fields, "value")
        if tag == "censored" and value:
            raise MalformedRow(line, "censored rows must have an empty value")
        seq_text = cell(fields, "n")
        ts_text = cell(fields, "timestamp")
        time_text = cell(fields, "time")
        try:
            seq = int(seq_text) if seq_text else None
            ts = parse_timestamp(ts_text) if ts_text else None
            days = float(time_text.replace(",", ".")) if time_text else None
        except ValueError as exc:
            raise MalformedRow(line, str(exc)) from None
        if ts is None and days is None:
            raise MalformedRow(line, "row has neither timestamp nor time")
        cohort = cell(fields, cohort_key) or None
        rows.append(RawRow(pid, seq, ts, days, tag, value, cohort, line))
    return rows


def normalize_times(rows: Iterable[RawRow], cutoff: datetime | None = None) -> list[RawRow]:
    """Fill ``time_days`` from timestamps, relative to each player's first event.

    Players whose rows all carry ``time_days`` but not all a timestamp keep
    their times. If a timestamped player has no censored row and ``cutoff``
    is given, a censored row at the cutoff is appended.
    """
    by_player: dict[str, list[RawRow]] = defaultdict(list)
    for row in rows:
        by_player[row.player_id].append(row)

    out: list[RawRow] = []
    for pid, group in by_player.items():
        if all(r.timestamp is not None for r in group):
            events = [r for r in group if r.type_tag != "censored"]
            origin = min(r.timestamp for r in (events or group))
            synthesize = cutoff is not None and not any(r.type_tag == "censored" for r in group)
            if synthesize and cutoff < origin:
                raise CutoffBeforeFirstEvent(
                    f"player {pid!r}: cutoff {cutoff} precedes first event {origin}"
                )
            filled = []
            for r in group:
                elapsed = (r.timestamp - origin).total_seconds() / SECONDS_PER_DAY
                if elapsed < 0:
                    raise NegativeElapsed(
                        f"player {pid!r}, line {r.line}: {r.type_tag} row precedes first event"
                    )
                filled.append(replace(r, time_days=elapsed))
            if synthesize:
                elapsed = (cutoff - origin).total_seconds() / SECONDS_PER_DAY
                filled.append(
                    RawRow(pid, None, cutoff, elapsed, "censored", "", group[0].cohort, 0)
                )
            out.extend(filled)
        elif all(r.time_days is not None for r in group):
            out.extend(group)
        else:
            raise MixedTimeBases(pid)
    return out


def _build_history(pid: str, rows: list[RawRow], cutoff_days: float | None) -> PlayerHistory:
    censor_rows = [r for r in rows if r.type_tag == "censored"]
    if len(censor_rows) > 1:
        raise MultipleCensoringRows(pid, len(censor_rows))
    if censor_rows:
        tau = censor_rows[0].time_days
    elif cutoff_days is not None:
        tau = cutoff_days
    else:
        raise MissingCensoringRow(pid)

    event_rows = sorted(
        (r for r in rows if r.type_tag != "censored"),
        key=lambda r: (r.time_days, r.seq if r.seq is not None else 0, r.type_tag, r.value_text),
    )
    events = []
    for r in event_rows:
        if r.type_tag == "session":
            value = parse_duration(r.value_text) if r.value_text else None
            kind = EventKind.SESSION
        else:
            if not r.value_text:
                raise MalformedRow(r.line, "purchase row without an amount")
            value = parse_money(r.value_text)
            kind = EventKind.PURCHASE
        events.append(EventRecord(r.time_days, kind, value))

    install = None
    stamped = [r.timestamp for r in rows if r.timestamp is not None]
    if len(stamped) == len(rows):
        non_censor = [r.timestamp for r in rows if r.type_tag != "censored"]
        install = min(non_censor or stamped)
    return validate_history(PlayerHistory(pid, tuple(events), tau, install))


def group_histories(rows: list[RawRow], options: IngestOptions = IngestOptions()) -> dict[str, list[PlayerHistory]]:
    """Group normalized rows by cohort label, one history per player."""
    by_player: dict[str, list[RawRow]] = defaultdict(list)
    for row in rows:
        by_player[row.player_id].append(row)

    cohorts: dict[str, list[PlayerHistory]] = defaultdict(list)
    for pid in sorted(by_player):
        group = by_player[pid]
        labels = {r.cohort for r in group if r.cohort is not None}
        if options.cohort_column is not None:
            if len(labels) != 1:
                line = min(r.line for r in group)
                raise MalformedRow(line, f"player {pid!r} has cohort labels {sorted(labels)!r}")
            label = labels.pop()
        else:
            label = options.label
        cohorts[label].append(_build_history(pid, group, options.cutoff_days))
    return dict(cohorts)


def parse_cohorts(content: bytes | str | IO[str], options: IngestOptions = IngestOptions()) -> dict[str, CohortSample]:
    """Parse a log into one :class:`CohortSample` per cohort label.

    Without ``options.cohort_column`` every player goes to ``options.label``.
    """
    rows = normalize_times(read_rows(content, options), options.cutoff)
    return {
        label: CohortSample(label, tuple(players))
        for label, players in sorted(group_histories(rows, options).items())
    }


def parse_events_csv(content: bytes | str | IO[str], options: IngestOptions = IngestOptions()) -> CohortSample:
    """Parse a log into a single cohort labelled ``options.label``."""
    rows = normalize_times(read_rows(content, options), options.cutoff)
    plain = replace(options, cohort_column=None)
    players = group_histories(rows, plain).get(plain.label, [])
    return CohortSample(plain.label, tuple(players))


def format_days(t: float) -> str:
    return repr(float(t))


def write_events_csv(
    samples: CohortSample | Mapping[str, CohortSample] | Iterable[CohortSample],
    stream: IO[str],
    *,
    delimiter: str = ",",
    cohort_column: bool = False,
) -> None:
    """Write cohorts in the time-based layout (no calendar timestamps).

    Times are written with full ``repr`` precision so a re-parse gives back
    identical histories.
    """
    if isinstance(samples, CohortSample):
        samples = [samples]
    elif isinstance(samples, Mapping):
        samples = list(samples.values())
    writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    header = ["id", "n", "time", "type", "value"]
    if cohort_column:
        header.append("cohort")
    writer.writerow(header)
    for sample in samples:
        for player in sample.players:
            rows = []
            for event in player.events:
                if event.value is None:
                    text = ""
                elif event.kind is EventKind.SESSION:
                    text = format_duration(event.value)
                else:
                    text = repr(float(event.value))
                rows.append((format_days(event.time_since_install), event.kind.value, text))
            rows.append((format_days(player.censoring_time), "censored", ""))
            for n, (t, tag, text) in enumerate(rows, start=1):
                record = [player.player_id, n, t, tag, text]
                if cohort_column:
                    record.append(sample.label)
                writer.writerow(record)


def dumps_events_csv(samples, **kwargs) -> str:
    buf = io.StringIO()
    write_events_csv(samples, buf, **kwargs)
    return buf.getvalue()
