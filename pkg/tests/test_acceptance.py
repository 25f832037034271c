"""End-to-end acceptance checks, one test per criterion.

Each test records a verdict in ``conftest.ACCEPTANCE`` before asserting, so
the terminal summary lists every criterion with PASS or FAIL.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE, as_stream
from mcfmetrics.comparison import chi_square_sf, score_test
from mcfmetrics.events import CohortSample, CostStream, EventKind, EventRecord, PlayerCosts, PlayerHistory
from mcfmetrics.mcf import compute_mcf, evaluate
from mcfmetrics.simulation import SimParams, simulate_cohort
from mcfmetrics.transforms import daily_rate, mcf_for_metric, retention_table
from montecarlo import coverage, null_rejections, unique_players_per_day
from oracles import brute_mcf, chi2_1_sf_quadrature, sample_mean_and_biased_var, welch_squared


def record(n, name, ok, detail):
    ACCEPTANCE[n] = (name, bool(ok), detail)
    assert ok, f"criterion {n}: {name}: {detail}"


def random_common_tau(rng, max_players=8, tau=None):
    tau = float(rng.integers(0, 7)) if tau is None else tau
    data = []
    for _ in range(int(rng.integers(1, max_players + 1))):
        k = int(rng.integers(0, 4))
        times = np.sort(rng.integers(0, int(tau) + 1, size=k)).astype(float).tolist()
        costs = rng.uniform(0, 5, size=k).round(3).tolist()
        data.append((times, costs, tau))
    return data


def test_criterion_1_large_cohort_rows():
    start = time.perf_counter()
    m = 10068
    players = [PlayerCosts(f"e{i}", [3e-5], [1.0], 100.0) for i in range(8)]
    # the four later events belong to four further players
    players += [PlayerCosts(f"f{i}", [5e-5], [1.0], 100.0) for i in range(4)]
    players += [PlayerCosts(f"q{i}", [], [], 100.0) for i in range(m - 12)]
    curve = compute_mcf(CostStream("large", tuple(players)))
    elapsed = time.perf_counter() - start
    got = (
        [round(float(x), 5) for x in curve.mcf],
        [round(float(x), 5) for x in curve.ci_lower],
        [round(float(x), 5) for x in curve.ci_upper],
    )
    want = ([0.00079, 0.00119], [0.00024, 0.00052], [0.00135, 0.00187])
    record(1, "large-cohort first two rows", got == want and elapsed < 1.0, f"got {got}, {elapsed:.3f}s")


def test_criterion_2_first_day_rate():
    players = []
    for i in range(103):
        k = 2 if i < 73 else 1
        players.append(
            PlayerHistory(str(i), tuple(EventRecord(0.1 + 0.01 * j, EventKind.SESSION, 60.0) for j in range(k)), 3.0)
        )
    sample = CohortSample("3.7", tuple(players))
    table = retention_table(sample)
    exact = Fraction(table.cells[0][0], table.dnu[0])
    rate = daily_rate(mcf_for_metric(sample, "sessions"))[0][1]
    ok = exact == Fraction(176, 103) and rate == pytest.approx(176 / 103, rel=1e-15) and round(rate, 1) == 1.7
    record(2, "first-day rate 176/103", ok, f"table {exact}, curve {rate!r}")


def test_criterion_3_hand_oracle(three_players):
    data = [([1.0, 2.0], [1.0, 1.0], 3.0), ([2.0], [1.0], 2.0), ([], [], 1.0)]
    curve = compute_mcf(three_players)
    mcf2, var1 = evaluate(curve, 2.0).mcf, evaluate(curve, 1.0).variance
    b_mcf2, b_var1 = brute_mcf(data, 2.0)[0], brute_mcf(data, 1.0)[1]
    ok = all(
        abs(x - y) <= 1e-12 for x, y in [(mcf2, 4 / 3), (var1, 2 / 27), (b_mcf2, 4 / 3), (b_var1, 2 / 27), (mcf2, b_mcf2), (var1, b_var1)]
    )
    record(3, "hand oracle", ok, f"MCF(2)={mcf2!r}, Var(1)={var1!r}")


def test_criterion_4_uncensored_sample_mean():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        data = random_common_tau(rng)
        tau = data[0][2]
        mean, biased = sample_mean_and_biased_var([math.fsum(c) for _, c, _ in data])
        point = evaluate(compute_mcf(as_stream(data)), tau)
        for got, want in [(point.mcf, mean), (point.variance, biased / len(data))]:
            worst = max(worst, abs(got - want) / max(abs(want), 1e-300) if want else abs(got))
    record(4, "uncensored case is the sample mean", worst <= 1e-12, f"max rel err {worst:.2e}")


def test_criterion_5_welch_reduction():
    rng = np.random.default_rng(5)
    worst, done = 0.0, 0
    while done < 100:
        tau = float(rng.integers(0, 7))
        d1, d2 = random_common_tau(rng, tau=tau), random_common_tau(rng, tau=tau)
        c1 = [math.fsum(c) for _, c, _ in d1]
        c2 = [math.fsum(c) for _, c, _ in d2]
        if np.var(c1) == 0 and np.var(c2) == 0:
            continue  # Welch is undefined with no spread in either cohort
        res = score_test(as_stream(d1, "a"), as_stream(d2, "b"))
        want = welch_squared(c1, c2)
        worst = max(worst, abs(res.chi_square - want) / max(want, 1e-300) if want else res.chi_square)
        done += 1
    record(5, "score test reduces to Welch", worst <= 1e-10, f"max rel err {worst:.2e}")


def test_criterion_6_coverage():
    start = time.perf_counter()
    run = coverage(500)
    elapsed = time.perf_counter() - start
    ok = 0.92 <= run.robust <= 0.98 and elapsed < 60
    record(6, "95% interval coverage", ok, f"{run.robust:.3f} over {run.reps} reps, {elapsed:.1f}s")


def test_criterion_7_null_calibration():
    start = time.perf_counter()
    hits = null_rejections(500)
    elapsed = time.perf_counter() - start
    rate = hits / 500
    record(7, "null rejection rate", 0.03 <= rate <= 0.07 and elapsed < 60, f"{rate:.3f} over 500 splits, {elapsed:.1f}s")


def test_criterion_8_chi_square_tail():
    got = chi_square_sf(3.841459)
    ref = chi2_1_sf_quadrature(3.841459)
    ok = abs(got - 0.05) <= 1e-6 and abs(ref - 0.05) <= 1e-6 and abs(got - ref) <= 1e-12
    record(8, "chi-square tail at 3.841459", ok, f"{got!r} vs quadrature {ref!r}")


def test_criterion_9_retention_correspondence():
    sample = simulate_cohort(SimParams(m=300, churn_rate=0.2, session_rate=1.5, accrual_days=20, seed=9))
    rates = daily_rate(mcf_for_metric(sample, "distinct-days"))
    mismatches = []
    for d, rate in rates:
        active, observed = unique_players_per_day(sample, d)
        if Fraction(rate) != Fraction(active / observed) or rate != active / observed:
            mismatches.append((d, rate, active, observed))
    ok = not mismatches and len(rates) >= 10
    record(9, "distinct-days differences are retention rates", ok, f"{len(rates)} days, {len(mismatches)} mismatches")
