import io
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcfmetrics.errors import InvalidParams
from mcfmetrics.events import EventKind, validate_history
from mcfmetrics.ingestion import parse_events_csv, write_events_csv
from mcfmetrics.simulation import (
    SimParams,
    analytic_asymptote,
    analytic_mean,
    simulate_cohort,
    simulate_player,
)
from montecarlo import coverage


def export(sample) -> str:
    buf = io.StringIO()
    write_events_csv([sample], buf)
    return buf.getvalue()


def test_no_sessions_when_rate_is_zero():
    sample = simulate_cohort(SimParams(m=50, churn_rate=0.5, session_rate=0.0, accrual_days=10, seed=4))
    assert all(not h.events for h in sample.players)


def test_no_churn_counts_look_poisson():
    # large accrual window, count only events up to a common horizon
    params = SimParams(m=4000, churn_rate=0.0, session_rate=1.5, accrual_days=10, seed=8)
    horizon = 4.0
    counts = np.array(
        [
            sum(1 for e in h.events if e.time_since_install <= horizon)
            for h in simulate_cohort(params).players
            if h.censoring_time >= horizon
        ]
    )
    n = counts.size
    lam = params.session_rate * horizon
    assert abs(counts.mean() - lam) < 4 * math.sqrt(lam / n)
    assert counts.var(ddof=1) == pytest.approx(lam, rel=0.1)


def test_censoring_is_uniform_on_accrual_window():
    sample = simulate_cohort(SimParams(m=3000, churn_rate=0.2, session_rate=1.0, accrual_days=30, seed=1))
    tau = np.array([h.censoring_time for h in sample.players])
    assert tau.min() >= 0 and tau.max() <= 30
    assert abs(tau.mean() - 15) < 4 * 30 / math.sqrt(12 * tau.size)


def test_histories_are_valid():
    params = SimParams(m=100, churn_rate=0.3, session_rate=2.0, accrual_days=20, purchase_rate=0.4, purchase_mean=3.0, seed=2)
    sample = simulate_cohort(params)
    for h in sample.players:
        validate_history(h)
    purchases = [e.value for h in sample.players for e in h.of_kind(EventKind.PURCHASE)]
    assert purchases and all(v >= 0 for v in purchases)


def test_analytic_mean_values():
    p = SimParams(m=1, churn_rate=0.5, session_rate=1.0, accrual_days=30)
    assert analytic_mean(p, 0.0) == 0.0
    assert analytic_mean(SimParams(m=1, churn_rate=0.0, session_rate=2.0, accrual_days=5), 3.0) == 6.0
    assert analytic_asymptote(p) == 2.0
    assert analytic_mean(p, 200.0) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ValueError):
        analytic_mean(p, -1.0)


@pytest.mark.parametrize("t", [0.5, 5.0, 40.0])
def test_analytic_mean_matches_quadrature(t):
    # expected sessions = integral of mu * P(alive at s) over [0, t]
    p = SimParams(m=1, churn_rate=0.5, session_rate=1.0, accrual_days=30)
    mpmath.mp.dps = 30
    ref = mpmath.quad(lambda s: p.session_rate * mpmath.e ** (-p.churn_rate * s), [0, t])
    assert analytic_mean(p, t) == pytest.approx(float(ref), rel=1e-13)


def test_asymptote_matches_quadrature():
    mpmath.mp.dps = 30
    ref = mpmath.quad(lambda s: mpmath.e ** (-0.5 * s), [0, mpmath.inf])
    assert analytic_asymptote(SimParams(m=1, churn_rate=0.5, session_rate=1.0, accrual_days=1)) == pytest.approx(float(ref))


def test_reproducible_export():
    params = SimParams(m=40, churn_rate=0.3, session_rate=2.0, accrual_days=15, purchase_rate=0.2, seed=123)
    assert export(simulate_cohort(params)) == export(simulate_cohort(params))
    other = SimParams(m=40, churn_rate=0.3, session_rate=2.0, accrual_days=15, purchase_rate=0.2, seed=124)
    assert export(simulate_cohort(other)) != export(simulate_cohort(params))


def test_substreams_are_order_independent():
    params = SimParams(m=20, churn_rate=0.3, session_rate=2.0, accrual_days=15, seed=77)
    sample = simulate_cohort(params)
    children = np.random.SeedSequence(77).spawn(20)
    for i in reversed(range(20)):
        alone = simulate_player(params, np.random.default_rng(children[i]), sample.players[i].player_id)
        assert alone == sample.players[i]


def test_export_parses_back():
    sample = simulate_cohort(SimParams(m=30, churn_rate=0.3, session_rate=2.0, accrual_days=15, purchase_rate=0.3, seed=9))
    back = parse_events_csv(export(sample))
    assert [h.player_id for h in back.players] == [h.player_id for h in sample.players]
    for a, b in zip(back.players, sample.players):
        assert a.censoring_time == b.censoring_time
        assert a.events == b.events


@pytest.mark.parametrize(
    "kw",
    [
        dict(m=0),
        dict(churn_rate=-0.1),
        dict(session_rate=-1.0),
        dict(accrual_days=0.0),
        dict(purchase_rate=-1.0),
        dict(purchase_mean=0.0),
        dict(session_rate=math.nan),
        dict(m=2.5),
    ],
)
def test_invalid_params(kw):
    base = dict(m=10, churn_rate=0.5, session_rate=1.0, accrual_days=30)
    base.update(kw)
    with pytest.raises(InvalidParams):
        SimParams(**base)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_deterministic_for_any_seed(seed):
    params = SimParams(m=5, churn_rate=0.5, session_rate=1.0, accrual_days=5, seed=seed)
    assert simulate_cohort(params) == simulate_cohort(params)


@pytest.fixture(scope="module")
def coverage_run():
    return coverage(200)


def test_estimator_is_unbiased(coverage_run):
    assert abs(coverage_run.bias_z()) < 3


def test_poisson_variance_undercovers_while_robust_holds(coverage_run):
    # churn makes per-player counts overdispersed; a Poisson variance is too small
    assert coverage_run.robust >= 0.90
    assert coverage_run.poisson < 0.88
    assert coverage_run.poisson < coverage_run.robust - 0.05
