"""Mean cumulative function estimate with robust variance.

For distinct event times ``t_j`` with total cost ``dc(t_j)`` and ``y(t_j)``
players still under observation, the estimate is the running sum of
``dc(t_j) / y(t_j)``. The variance is the robust (sandwich) form: each
player's score is the running sum of ``(dc_i(t_j) - dc(t_j)/y(t_j)) / y(t_j)``
over the times at which that player is observable, and the variance at ``t``
is the sum over players of their squared score at ``t``. No Poisson
assumption is made about the event process.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import IO, NamedTuple, Sequence

import numpy as np

from .errors import BeyondObservationWindow, EmptyCohort, EmptyInput, NoObservablePlayers
from .events import CostStream

CURVE_COLUMNS = (
    "time",
    "observable",
    "cost",
    "increment",
    "mcf",
    "variance",
    "ci_lower",
    "ci_upper",
)


# conventional tabulated critical values; published tables use these
CRITICAL_VALUES = {0.90: 1.645, 0.95: 1.96, 0.99: 2.576}


def normal_quantile(level: float) -> float:
    """Two-sided standard normal critical value for confidence ``level``.

    The usual levels use their tabulated values (1.96 at 0.95) so intervals
    match published tables digit for digit; other levels use the exact
    quantile.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level!r}")
    if level in CRITICAL_VALUES:
        return CRITICAL_VALUES[level]
    return NormalDist().inv_cdf(0.5 + level / 2.0)


class McfPoint(NamedTuple):
    mcf: float
    variance: float
    ci: tuple[float, float]


@dataclass(frozen=True)
class McfCurve:
    """Right-continuous step function of the estimate and its interval.

    Arrays are aligned on ``times`` (strictly increasing). ``max_time`` is the
    largest censoring time; the curve is undefined beyond it.
    """

    label: str
    times: np.ndarray
    observable: np.ndarray
    total_cost: np.ndarray
    increment: np.ndarray
    mcf: np.ndarray
    variance: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    level: float
    max_time: float
    n_players: int

    def __len__(self) -> int:
        return self.times.size

    def evaluate(self, t: float) -> McfPoint:
        return evaluate(self, t)

    def at(self, grid: np.ndarray) -> dict[str, np.ndarray]:
        """Vectorized step lookup; points past ``max_time`` come back as NaN."""
        grid = np.asarray(grid, dtype=float)
        idx = np.searchsorted(self.times, grid, side="right") - 1
        out = {}
        for name in ("mcf", "variance", "ci_lower", "ci_upper"):
            values = getattr(self, name)
            col = np.where(idx >= 0, values[np.maximum(idx, 0)] if values.size else 0.0, 0.0)
            out[name] = np.where(grid > self.max_time, np.nan, col)
        return out

    def to_records(self) -> list[dict[str, float]]:
        return [
            {
                "time": float(self.times[j]),
                "observable": int(self.observable[j]),
                "cost": float(self.total_cost[j]),
                "increment": float(self.increment[j]),
                "mcf": float(self.mcf[j]),
                "variance": float(self.variance[j]),
                "ci_lower": float(self.ci_lower[j]),
                "ci_upper": float(self.ci_upper[j]),
            }
            for j in range(self.times.size)
        ]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "level": self.level,
            "max_time": self.max_time,
            "n_players": self.n_players,
            "time": self.times.tolist(),
            "observable": self.observable.astype(int).tolist(),
            "cost": self.total_cost.tolist(),
            "increment": self.increment.tolist(),
            "mcf": self.mcf.tolist(),
            "variance": self.variance.tolist(),
            "ci_lower": self.ci_lower.tolist(),
            "ci_upper": self.ci_upper.tolist(),
        }


def _robust_variance(
    grid: np.ndarray,
    observable: np.ndarray,
    increment: np.ndarray,
    event_index: np.ndarray,
    event_cost: np.ndarray,
    event_player: np.ndarray,
    tau: np.ndarray,
) -> np.ndarray:
    # Sweep over the grid. Observable players have score E_i - B(t) where E_i
    # is their own scaled cost so far and B the running sum of increment / y.
    # Their squared scores are tracked through a running mean and M2 so no
    # sum-of-squares cancellation occurs. Censored players keep a frozen score.
    n = grid.size
    m = tau.size
    variance = np.zeros(n)
    if n == 0:
        return variance

    leave_at = np.searchsorted(grid, tau, side="right")
    leavers: list[list[int]] = [[] for _ in range(n + 1)]
    for i in np.argsort(tau, kind="stable"):
        leavers[leave_at[i]].append(int(i))

    order = np.argsort(event_index, kind="stable")
    ev_j = event_index[order].tolist()
    ev_i = event_player[order].tolist()
    ev_c = event_cost[order].tolist()
    n_events = len(ev_j)

    score = [0.0] * m
    count, mean, m2 = m, 0.0, 0.0
    frozen = 0.0
    running = 0.0
    k = 0
    y = observable.tolist()
    inc = increment.tolist()
    for j in range(n):
        for i in leavers[j]:
            x = score[i]
            d = x - running
            frozen += d * d
            if count > 1:
                new_mean = mean - (x - mean) / (count - 1)
                m2 -= (x - mean) * (x - new_mean)
                mean = new_mean
            else:
                mean, m2 = 0.0, 0.0
            count -= 1
        yj = y[j]
        running += inc[j] / yj
        while k < n_events and ev_j[k] == j:
            i = ev_i[k]
            x = score[i]
            x_new = x + ev_c[k] / yj
            new_mean = mean + (x_new - x) / count
            m2 += (x_new - x) * ((x_new - new_mean) + (x - mean))
            mean = new_mean
            score[i] = x_new
            k += 1
        shift = mean - running
        variance[j] = frozen + max(m2, 0.0) + count * shift * shift
    return variance


def compute_mcf(costs: CostStream, level: float = 0.95, *, clamp: bool = False) -> McfCurve:
    """Estimate the mean cumulative cost curve of a cohort.

    Parameters
    ----------
    costs
        Per-player cost streams with their (effective) censoring times.
    level
        Confidence level of the normal intervals, 0.95 by default.
    clamp
        Clip the lower interval bound at zero. Off by default.

    Only times carrying a nonzero cost become grid points; zero-cost events
    change neither the estimate nor its variance. Tied events, within or
    across players, are pooled into one increment.
    """
    z = normal_quantile(level)
    m = len(costs)
    if m == 0:
        raise EmptyCohort(f"cohort {costs.label!r} has no players")
    times, values, owner, tau = costs.flatten()
    keep = values != 0
    ev_t, ev_c, ev_p = times[keep], values[keep], owner[keep]
    grid = np.unique(ev_t)
    observable = m - np.searchsorted(np.sort(tau), grid, side="left")
    if np.any(observable <= 0):
        raise NoObservablePlayers(f"cohort {costs.label!r}: event time with nobody observable")

    ev_j = np.searchsorted(grid, ev_t)
    total = np.bincount(ev_j, weights=ev_c, minlength=grid.size)
    increment = total / observable
    mcf = np.cumsum(increment)
    variance = _robust_variance(grid, observable, increment, ev_j, ev_c, ev_p, tau)
    half = z * np.sqrt(variance)
    lower = mcf - half
    if clamp:
        lower = np.maximum(lower, 0.0)
    return McfCurve(
        label=costs.label,
        times=grid,
        observable=observable.astype(np.int64),
        total_cost=total,
        increment=increment,
        mcf=mcf,
        variance=variance,
        ci_lower=lower,
        ci_upper=mcf + half,
        level=level,
        max_time=float(tau.max()),
        n_players=m,
    )


def evaluate(curve: McfCurve, t: float) -> McfPoint:
    """Value of the step function at ``t`` (the last grid point ``<= t``)."""
    if not t >= 0:
        raise ValueError(f"time must be >= 0, got {t!r}")
    if t > curve.max_time:
        raise BeyondObservationWindow(
            f"t={t} is beyond the observation window (max censoring time {curve.max_time})"
        )
    j = int(np.searchsorted(curve.times, t, side="right")) - 1
    if j < 0:
        return McfPoint(0.0, 0.0, (0.0, 0.0))
    return McfPoint(
        float(curve.mcf[j]),
        float(curve.variance[j]),
        (float(curve.ci_lower[j]), float(curve.ci_upper[j])),
    )


@dataclass(frozen=True)
class AlignedCurves:
    """Several curves evaluated on one shared grid (rows follow ``labels``)."""

    labels: tuple[str, ...]
    times: np.ndarray
    mcf: np.ndarray
    variance: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    max_time: float


def merge_at_common_grid(curves: Sequence[McfCurve], *, common_window: bool = False) -> AlignedCurves:
    """Evaluate curves on the union of their event times.

    With ``common_window`` the grid stops at the smallest ``max_time`` so
    every curve is defined at every point; otherwise points past a curve's
    own window are NaN for that curve.
    """
    if not curves:
        raise EmptyInput("no curves to merge")
    grid = np.unique(np.concatenate([c.times for c in curves]))
    limit = min(c.max_time for c in curves) if common_window else max(c.max_time for c in curves)
    grid = grid[grid <= limit]
    columns = [c.at(grid) for c in curves]
    return AlignedCurves(
        labels=tuple(c.label for c in curves),
        times=grid,
        mcf=np.vstack([col["mcf"] for col in columns]),
        variance=np.vstack([col["variance"] for col in columns]),
        ci_lower=np.vstack([col["ci_lower"] for col in columns]),
        ci_upper=np.vstack([col["ci_upper"] for col in columns]),
        max_time=limit,
    )


def _fmt(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x)) if math.isfinite(x) else ""


def write_curve_csv(curves: McfCurve | Sequence[McfCurve], stream: IO[str]) -> None:
    """Write one or more curves; a leading ``cohort`` column is added for several."""
    if isinstance(curves, McfCurve):
        curves = [curves]
    multi = len(curves) > 1
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow((["cohort"] if multi else []) + list(CURVE_COLUMNS))
    for curve in curves:
        for record in curve.to_records():
            row = [_fmt(record[c]) for c in CURVE_COLUMNS]
            writer.writerow(([curve.label] if multi else []) + row)


def write_curve_json(curves: McfCurve | Sequence[McfCurve], stream: IO[str]) -> None:
    if isinstance(curves, McfCurve):
        payload = curves.to_dict()
    else:
        payload = {"cohorts": {c.label: c.to_dict() for c in curves}}
    json.dump(payload, stream, indent=2)
    stream.write("\n")
