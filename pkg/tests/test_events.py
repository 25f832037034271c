import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcfmetrics.errors import (
    DuplicatePlayer,
    EmptyCohort,
    EventAfterCensoring,
    NegativeValue,
    UnsortedEvents,
)
from mcfmetrics.events import (
    CohortSample,
    EventKind,
    EventRecord,
    PlayerCosts,
    PlayerHistory,
    validate_history,
)

S = EventKind.SESSION


def history(times, tau, pid="1", value=60.0):
    return PlayerHistory(pid, tuple(EventRecord(t, S, value) for t in times), tau)


def test_sample_log_player_is_valid():
    h = history([0.0, 1.12], 102.93)
    assert validate_history(h) is h


def test_empty_history_with_zero_window_is_valid():
    h = history([], 0.0)
    assert validate_history(h) is h


def test_event_after_censoring_names_player_and_index():
    with pytest.raises(EventAfterCensoring) as err:
        validate_history(history([1.0, 5.0], 3.0, pid="p9"))
    assert err.value.player_id == "p9"
    assert err.value.index == 1


def test_event_exactly_at_censoring_is_observable():
    h = validate_history(history([3.0], 3.0))
    assert all(h.observable(e.time_since_install) for e in h.events)


def test_unsorted_events():
    with pytest.raises(UnsortedEvents) as err:
        validate_history(history([2.0, 1.0], 3.0))
    assert err.value.index == 1


def test_negative_value():
    with pytest.raises(NegativeValue):
        validate_history(history([1.0], 3.0, value=-1.0))


def test_duplicate_timestamps_are_legal():
    validate_history(history([26.27, 26.27], 30.0))


def test_cohort_requires_players_and_unique_ids():
    with pytest.raises(EmptyCohort):
        CohortSample("x", ())
    with pytest.raises(DuplicatePlayer):
        CohortSample("x", (history([], 1.0, "a"), history([], 2.0, "a")))


def test_cost_stream_rejects_costs_after_censoring():
    with pytest.raises(EventAfterCensoring):
        PlayerCosts("a", [1.0, 4.0], [1.0, 1.0], 3.0)


@given(
    st.lists(st.floats(0, 100, allow_nan=False), max_size=8),
    st.floats(0, 50, allow_nan=False),
)
def test_validation_is_idempotent_and_events_observable(raw_times, extra):
    times = sorted(raw_times)
    tau = (times[-1] if times else 0.0) + extra
    h = history(times, tau)
    once = validate_history(h)
    assert validate_history(once) == once == h
    assert all(once.observable(e.time_since_install) for e in once.events)
