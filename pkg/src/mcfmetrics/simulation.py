"""Synthetic censored cohorts with a known mean function.

Each player gets an exponential lifetime (churn), plays sessions as a
homogeneous Poisson process while alive, and is observed from install until a
data-collection cutoff. With uniform install accrual over ``[0, A]`` the
observation window ``tau`` is uniform on ``[0, A]``. Churned players keep
contributing zero activity until their censoring time, which gives the
overdispersed, history-dependent counts a Poisson model misses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams
from .events import CohortSample, EventKind, EventRecord, PlayerHistory


@dataclass(frozen=True)
class SimParams:
    m: int
    churn_rate: float
    session_rate: float
    accrual_days: float
    purchase_rate: float = 0.0
    purchase_mean: float = 1.0
    session_length_mean: float = 600.0
    seed: int = 0
    label: str = "sim"

    def __post_init__(self) -> None:
        checks = {
            "m >= 1": isinstance(self.m, (int, np.integer)) and self.m >= 1,
            "churn_rate >= 0": self.churn_rate >= 0,
            "session_rate >= 0": self.session_rate >= 0,
            "accrual_days > 0": self.accrual_days > 0,
            "purchase_rate >= 0": self.purchase_rate >= 0,
            "purchase_mean > 0": self.purchase_mean > 0,
            "session_length_mean > 0": self.session_length_mean > 0,
        }
        values = (
            self.churn_rate,
            self.session_rate,
            self.accrual_days,
            self.purchase_rate,
            self.purchase_mean,
            self.session_length_mean,
        )
        failed = [name for name, ok in checks.items() if not ok]
        if not all(math.isfinite(v) for v in values):
            failed.append("finite rates")
        if failed:
            raise InvalidParams("invalid simulation parameters: " + ", ".join(failed))


def _poisson_times(rng: np.random.Generator, rate: float, end: float) -> np.ndarray:
    if rate <= 0 or end <= 0:
        return np.empty(0)
    n = rng.poisson(rate * end)
    return np.sort(rng.uniform(0.0, end, size=n))


def simulate_player(params: SimParams, rng: np.random.Generator, player_id: str) -> PlayerHistory:
    tau = float(rng.uniform(0.0, params.accrual_days))
    life = rng.exponential(1.0 / params.churn_rate) if params.churn_rate > 0 else math.inf
    active_until = min(life, tau)
    sessions = _poisson_times(rng, params.session_rate, active_until)
    lengths = np.rint(rng.exponential(params.session_length_mean, size=sessions.size))
    purchases = _poisson_times(rng, params.purchase_rate, active_until)
    amounts = np.round(rng.exponential(params.purchase_mean, size=purchases.size), 2)
    events = [EventRecord(float(t), EventKind.SESSION, float(v)) for t, v in zip(sessions, lengths)]
    events += [EventRecord(float(t), EventKind.PURCHASE, float(v)) for t, v in zip(purchases, amounts)]
    events.sort(key=lambda e: (e.time_since_install, e.kind.value))
    return PlayerHistory(player_id, tuple(events), tau)


def simulate_cohort(params: SimParams) -> CohortSample:
    """Draw a cohort; player ``i`` uses its own substream spawned from ``seed``.

    Substreams make the result independent of generation order, so players
    can be produced in parallel without changing the output.
    """
    children = np.random.SeedSequence(params.seed).spawn(params.m)
    width = len(str(params.m))
    players = tuple(
        simulate_player(params, np.random.default_rng(child), f"p{i:0{width}d}")
        for i, child in enumerate(children)
    )
    return CohortSample(params.label, players)


def analytic_mean(params: SimParams, t: float) -> float:
    """Expected cumulative sessions per player by time ``t``."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t!r}")
    lam, mu = params.churn_rate, params.session_rate
    if lam == 0:
        return mu * t
    return mu * -math.expm1(-lam * t) / lam


def analytic_asymptote(params: SimParams) -> float:
    if params.churn_rate == 0:
        return math.inf
    return params.session_rate / params.churn_rate
