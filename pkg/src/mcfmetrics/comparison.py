"""Two-cohort and k-cohort comparisons of mean cumulative functions."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import DegenerateVariance, EmptyCohort, NegativeStatistic, NoCommonWindow
from .events import CohortSample, CostStream
from .mcf import McfCurve, _fmt, normal_quantile
from .transforms import MetricKind, to_cost_stream

WEIGHT_RULE = "y1*y2/(y1+y2)"


def chi_square_sf(x: float) -> float:
    """Upper tail of the chi-square distribution with one degree of freedom.

    Uses ``P(X > x) = erfc(sqrt(x / 2))``.
    """
    if math.isnan(x) or x < 0:
        raise NegativeStatistic(f"chi-square statistic must be >= 0, got {x!r}")
    return math.erfc(math.sqrt(x / 2.0))


@dataclass(frozen=True)
class DifferenceCurve:
    labels: tuple[str, str]
    times: np.ndarray
    diff: np.ndarray
    variance: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    level: float
    max_time: float

    @property
    def significant(self) -> np.ndarray:
        """Per-time flag: the interval excludes zero.

        Pointwise only; the time of interest should be fixed before looking.
        """
        return (self.ci_lower > 0) | (self.ci_upper < 0)

    def at(self, t: float) -> tuple[float, float]:
        """``(diff, variance)`` of the step function at ``t``."""
        if t > self.max_time:
            raise NoCommonWindow(f"t={t} is beyond the common window {self.max_time}")
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        if j < 0:
            return 0.0, 0.0
        return float(self.diff[j]), float(self.variance[j])

    def standardized(self, t: float) -> float:
        d, v = self.at(t)
        if v == 0:
            return 0.0 if d == 0 else math.copysign(math.inf, d)
        return d / math.sqrt(v)


def mcf_difference(a: McfCurve, b: McfCurve, level: float = 0.95) -> DifferenceCurve:
    """Pointwise difference ``a - b`` with variance ``var_a + var_b``.

    The grid is the union of both curves' event times, cut at the smaller of
    the two observation windows.
    """
    z = normal_quantile(level)
    limit = min(a.max_time, b.max_time)
    if limit <= 0:
        raise NoCommonWindow(f"curves {a.label!r} and {b.label!r} share no observation window")
    grid = np.unique(np.concatenate([a.times, b.times]))
    grid = grid[grid <= limit]
    va, vb = a.at(grid), b.at(grid)
    diff = va["mcf"] - vb["mcf"]
    var = va["variance"] + vb["variance"]
    half = z * np.sqrt(var)
    return DifferenceCurve(
        labels=(a.label, b.label),
        times=grid,
        diff=diff,
        variance=var,
        ci_lower=diff - half,
        ci_upper=diff + half,
        level=level,
        max_time=limit,
    )


@dataclass(frozen=True)
class TestResult:
    statistic: float
    variance: float
    chi_square: float
    p_value: float
    tau: float
    cohort_labels: tuple[str, str]
    weight_rule: str = WEIGHT_RULE

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "cohorts": list(self.cohort_labels),
            "statistic": self.statistic,
            "variance": self.variance,
            "chi_square": self.chi_square,
            "p_value": self.p_value,
            "tau": self.tau,
            "weight": self.weight_rule,
        }


_NOISE = 1e-12


def _cohort_arrays(costs: CostStream):
    times, values, owner, tau = costs.flatten()
    keep = values != 0
    return times[keep], values[keep], owner[keep], tau


def score_test(a: CostStream, b: CostStream) -> TestResult:
    """Robust score test that two cohorts share the same mean cumulative function.

    The statistic weighs the difference of per-time increments ``b - a`` by
    ``y_a * y_b / (y_a + y_b)`` over the union of event times; times where
    either cohort has nobody under observation get zero weight. Its variance
    is the robust per-player form, so no Poisson assumption is needed.
    ``U**2 / Var`` is referred to chi-square with one degree of freedom.
    """
    if len(a) == 0 or len(b) == 0:
        raise EmptyCohort("both cohorts need at least one player")
    arrays = [_cohort_arrays(a), _cohort_arrays(b)]
    grid = np.unique(np.concatenate([arr[0] for arr in arrays]))
    tau_max = float(max(arrays[0][3].max(), arrays[1][3].max()))

    observable, totals, indices = [], [], []
    for ev_t, ev_c, _, tau in arrays:
        y = tau.size - np.searchsorted(np.sort(tau), grid, side="left")
        j = np.searchsorted(grid, ev_t)
        observable.append(y.astype(float))
        totals.append(np.bincount(j, weights=ev_c, minlength=grid.size).astype(float))
        indices.append(j)
    y1, y2 = observable
    both = (y1 > 0) & (y2 > 0)
    weight = np.zeros(grid.size)
    weight[both] = y1[both] * y2[both] / (y1[both] + y2[both])
    rate = [np.divide(tot, y, out=np.zeros_like(tot), where=y > 0) for tot, y in zip(totals, observable)]
    statistic = float(np.sum(weight * (rate[1] - rate[0])))

    variance = 0.0
    magnitude = 0.0
    for (ev_t, ev_c, ev_p, tau), y, r, j in zip(arrays, observable, rate, indices):
        # per-player score: own weighted costs minus the cohort's weighted
        # increments accumulated up to the player's censoring time
        scale = np.divide(weight, y, out=np.zeros_like(weight), where=y > 0)
        expected = np.concatenate(([0.0], np.cumsum(scale * r)))
        score = -expected[np.searchsorted(grid, tau, side="right")]
        own = scale[j] * ev_c
        np.add.at(score, ev_p, own)
        variance += float(np.dot(score, score))
        magnitude += float(np.abs(own).sum())

    # scores are differences of sums of size ~magnitude; anything below this
    # floor is rounding noise around an exact zero
    floor = _NOISE * magnitude
    if variance > floor * floor:
        chi = statistic * statistic / variance
        p = chi_square_sf(chi)
    elif abs(statistic) <= floor:
        chi, p = 0.0, 1.0
    else:
        raise DegenerateVariance(statistic, (a.label, b.label))
    return TestResult(statistic, variance, chi, p, tau_max, (a.label, b.label))


def two_sample_test(a: CohortSample, b: CohortSample, kind: MetricKind | str) -> TestResult:
    return score_test(to_cost_stream(a, kind), to_cost_stream(b, kind))


@dataclass(frozen=True)
class PairwiseResult:
    result: TestResult
    significant: bool


@dataclass(frozen=True)
class BonferroniResult:
    alpha: float
    threshold: float
    n_comparisons: int
    pairs: tuple[PairwiseResult, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "family_alpha": self.alpha,
            "adjusted_alpha": self.threshold,
            "comparisons": self.n_comparisons,
            "pairs": [
                {**p.result.to_dict(), "significant": p.significant} for p in self.pairs
            ],
        }


def k_sample_bonferroni(samples: Sequence[CohortSample], kind: MetricKind | str, alpha: float = 0.05) -> BonferroniResult:
    """All pairwise score tests, each judged at ``alpha / (k (k - 1) / 2)``.

    Pairs are ordered by label.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if len(samples) < 2:
        raise ValueError("need at least two cohorts")
    labels = [s.label for s in samples]
    if len(set(labels)) != len(labels):
        raise ValueError(f"cohort labels must be unique, got {labels!r}")
    ordered = sorted(samples, key=lambda s: s.label)
    streams = [to_cost_stream(s, kind) for s in ordered]
    n_pairs = len(ordered) * (len(ordered) - 1) // 2
    threshold = alpha / n_pairs
    pairs = []
    for sa, sb in itertools.combinations(streams, 2):
        res = score_test(sa, sb)
        pairs.append(PairwiseResult(res, res.p_value < threshold))
    return BonferroniResult(alpha, threshold, n_pairs, tuple(pairs))


def write_difference_csv(curve: DifferenceCurve, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["time", "diff", "variance", "ci_lower", "ci_upper", "significant"])
    sig = curve.significant
    for j in range(curve.times.size):
        writer.writerow(
            [
                _fmt(curve.times[j]),
                _fmt(curve.diff[j]),
                _fmt(curve.variance[j]),
                _fmt(curve.ci_lower[j]),
                _fmt(curve.ci_upper[j]),
                int(sig[j]),
            ]
        )


def difference_to_dict(curve: DifferenceCurve) -> dict:
    return {
        "cohorts": list(curve.labels),
        "level": curve.level,
        "max_time": curve.max_time,
        "pointwise": True,
        "time": curve.times.tolist(),
        "diff": curve.diff.tolist(),
        "variance": curve.variance.tolist(),
        "ci_lower": curve.ci_lower.tolist(),
        "ci_upper": curve.ci_upper.tolist(),
        "significant": curve.significant.astype(int).tolist(),
    }


def dump_json(payload: dict, stream: IO[str]) -> None:
    json.dump(payload, stream, indent=2)
    stream.write("\n")
