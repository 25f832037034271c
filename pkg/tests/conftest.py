import pytest

from mcfmetrics.events import CostStream, PlayerCosts

SAMPLE_LOG_CSV = """\
ID,N,Timestamp,Time (d),Type,Value
1,1,2016-07-29  01:34:33,0.00,session,08:45
1,2,2016-07-29  03:38:59,0.09,session,12:52
1,3,2016-07-29  03:51:25,0.10,purchase,1.09€
1,4,2016-07-30  04:26:04,1.12,session,29:10
1,5,2016-07-30  15:32:13,1.58,session,00:01
1,6,2016-08-14  14:18:30,16.53,session,15:32
1,7,2016-11-09  00:00:00,102.93,censored,
2,1,2016-09-08  13:20:17,0.00,session,04:37
2,2,2016-09-08  14:07:40,0.03,session,04:40
2,3,2016-09-08  14:24:31,0.04,session,00:01
2,4,2016-09-10  14:05:10,2.03,session,03:17
2,5,2016-10-04  19:48:40,26.27,session,00:12
2,6,2016-10-04  19:48:55,26.27,session,02:34
2,7,2016-10-06  13:17:42,28.00,session,00:03
2,8,2016-11-09  00:00:00,61.44,censored,
"""


@pytest.fixture
def sample_log_csv() -> str:
    return SAMPLE_LOG_CSV


@pytest.fixture
def three_players() -> CostStream:
    # A: events at 1 and 2 (tau 3); B: event at 2 (tau 2); C: nothing (tau 1)
    return CostStream(
        "hand",
        (
            PlayerCosts("A", [1.0, 2.0], [1.0, 1.0], 3.0),
            PlayerCosts("B", [2.0], [1.0], 2.0),
            PlayerCosts("C", [], [], 1.0),
        ),
    )


def as_stream(data, label="x") -> CostStream:
    return CostStream(
        label, tuple(PlayerCosts(f"p{i}", t, c, tau) for i, (t, c, tau) in enumerate(data))
    )


# acceptance criteria record their verdict here; printed after the run
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {name} ({detail})")
