"""Exact penalized changepoint detection.

Minimizes, over changepoint sets ``0 < tau_1 < ... < tau_m < n``,

    sum_i C(y[tau_{i-1}+1 .. tau_i]) + m * beta

with ``C`` twice the negative maximized Gaussian log-likelihood of a segment.
:func:`pelt` solves it with candidate pruning; :func:`optimal_partition_oracle`
runs the same recursion without pruning and serves as its reference.

Positions are 1-based: a changepoint ``tau`` is the last observation of the
segment that ends there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .core import DailySeries, finite_or_raise
from .errors import ConfigError, DegenerateSegmentError, SizeGuardError

VAR_FLOOR = 1e-12
ORACLE_MAX_N = 10_000
_LOG_2PI = math.log(2.0 * math.pi)


class CostKind(str, Enum):
    MEAN_CHANGE = "mean"
    VARIANCE_CHANGE = "variance"
    MEAN_VARIANCE_CHANGE = "meanvar"

    @property
    def params_per_segment(self) -> int:
        return 2 if self is CostKind.MEAN_VARIANCE_CHANGE else 1

    @property
    def min_points(self) -> int:
        return 1 if self is CostKind.MEAN_CHANGE else 2


@dataclass(frozen=True)
class PeltConfig:
    """Solver configuration.

    ``known_mean`` only affects :attr:`CostKind.VARIANCE_CHANGE`; when None the
    series' sample mean is used as the fixed mean of every segment.
    """

    cost: CostKind = CostKind.VARIANCE_CHANGE
    penalty: float = 0.0
    min_segment_len: int | None = None
    known_mean: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "cost", CostKind(self.cost))
        if not math.isfinite(self.penalty):
            raise ConfigError("penalty must be finite")
        if self.penalty < 0:
            raise ConfigError(f"penalty must be >= 0, got {self.penalty}")
        if self.min_segment_len is None:
            object.__setattr__(self, "min_segment_len", 2)
        if int(self.min_segment_len) != self.min_segment_len or self.min_segment_len < 1:
            raise ConfigError("min_segment_len must be a positive integer")
        if self.min_segment_len < self.cost.min_points:
            raise ConfigError(
                f"{self.cost.value} cost needs segments of at least "
                f"{self.cost.min_points} points, got min_segment_len={self.min_segment_len}"
            )


@dataclass(frozen=True)
class Segmentation:
    changepoints: tuple[int, ...]
    total_cost: float
    n: int
    penalty: float
    cost_kind: CostKind
    min_segment_len: int
    dates: tuple | None = field(default=None, compare=False)

    @property
    def segments(self) -> list[tuple[int, int]]:
        """Inclusive 1-based ``(start, end)`` bounds of every segment."""
        bounds = (0, *self.changepoints, self.n)
        return [(bounds[i] + 1, bounds[i + 1]) for i in range(len(bounds) - 1)]

    def changepoint_dates(self):
        if self.dates is None:
            return None
        return [self.dates[t - 1] for t in self.changepoints]

    def to_json(self) -> dict:
        out = {
            "positions": list(self.changepoints),
            "total_cost": self.total_cost,
            "penalty": self.penalty,
            "cost_kind": self.cost_kind.value,
            "n": self.n,
            "min_segment_len": self.min_segment_len,
        }
        dates = self.changepoint_dates()
        if dates is not None:
            out["dates"] = [d.isoformat() for d in dates]
        return out


class CumulativeStats:
    """Prefix sums of the (centered) data for O(1) segment costs.

    Data are centered on their mean and accumulated in extended precision:
    segment variances come from differences of running sums, which lose
    digits when a segment is quiet relative to the whole series.
    """

    def __init__(self, values: Sequence[float], fixed_mean: float | None = None):
        x = finite_or_raise(values)
        self.n = len(x)
        self.center = float(x.mean()) if self.n else 0.0
        xc = (x - self.center).astype(np.longdouble)
        zero = np.zeros(1, dtype=np.longdouble)
        self.s1 = np.concatenate((zero, np.cumsum(xc)))
        self.s2 = np.concatenate((zero, np.cumsum(xc * xc)))
        self.count = np.arange(self.n + 1, dtype=float)
        self.global_var = float(np.mean(xc * xc)) if self.n else 0.0
        mean = self.center if fixed_mean is None else float(fixed_mean)
        self.fixed_mean = mean
        self._shift = mean - self.center

    def costs_ending_at(self, taus: np.ndarray, t: int, cost: CostKind) -> np.ndarray:
        """Costs of segments ``tau+1 .. t`` for every ``tau`` in ``taus``."""
        length = (t - taus).astype(np.longdouble)
        s1 = self.s1[t] - self.s1[taus]
        s2 = self.s2[t] - self.s2[taus]
        return _cost_from_sums(length, s1, s2, cost, self.global_var, self._shift)


def _cost_from_sums(length, s1, s2, cost, global_var, shift):
    if cost is CostKind.VARIANCE_CHANGE:
        ss = s2 - 2.0 * shift * s1 + length * shift * shift
    else:
        ss = s2 - s1 * s1 / length
    ss = np.maximum(ss, 0.0).astype(float)
    length = length.astype(float)
    if cost is CostKind.MEAN_CHANGE:
        var = max(global_var, VAR_FLOOR)
        return length * (_LOG_2PI + math.log(var)) + ss / var
    var = np.maximum(ss / length, VAR_FLOOR)
    return length * (_LOG_2PI + np.log(var) + 1.0)


def segment_cost(stats: CumulativeStats, s: int, e: int, cost: CostKind) -> float:
    """Cost of the inclusive 1-based segment ``s..e``."""
    cost = CostKind(cost)
    if not 1 <= s <= e <= stats.n:
        raise DegenerateSegmentError(f"segment {s}..{e} outside 1..{stats.n}")
    if e - s + 1 < cost.min_points:
        raise DegenerateSegmentError(
            f"{cost.value} cost needs at least {cost.min_points} points, "
            f"segment {s}..{e} has {e - s + 1}"
        )
    return float(stats.costs_ending_at(np.array([s - 1]), e, cost)[0])


def default_penalty(cost: CostKind, n: int) -> float:
    """BIC-style penalty ``p * log(n)``, ``p`` the parameters fitted per segment."""
    if n < 2:
        raise ConfigError("default_penalty needs n >= 2")
    return CostKind(cost).params_per_segment * math.log(n)


def _values_of(series):
    if isinstance(series, DailySeries):
        return series.values, series.dates
    return finite_or_raise(series, "series values"), None


def _solve(series, cfg: PeltConfig, prune: bool) -> Segmentation:
    values, dates = _values_of(series)
    n = len(values)
    m = cfg.min_segment_len
    beta = float(cfg.penalty)
    stats = CumulativeStats(values, cfg.known_mean)
    cost = cfg.cost
    if n < m:
        # too short for any split; the whole series is one segment
        return Segmentation((), segment_cost(stats, 1, n, cost) if n else 0.0,
                            n, beta, cost, m, dates)

    F = np.full(n + 1, np.inf)
    F[0] = -beta
    last = np.zeros(n + 1, dtype=np.int64)
    taus = np.array([0], dtype=np.int64)
    # step at which each candidate was found dominated; kept alive m-1 more
    # steps because segments shorter than m cannot yet end at the dominator
    never = n + m + 1
    pruned_at = np.array([never], dtype=np.int64)

    for t in range(m, n + 1):
        new = t - m
        if new >= m:
            taus = np.append(taus, new)
            pruned_at = np.append(pruned_at, never)
        if prune:
            alive = t < pruned_at + m
            if not alive.all():
                taus, pruned_at = taus[alive], pruned_at[alive]
        seg = stats.costs_ending_at(taus, t, cost)
        vals = F[taus] + seg + beta
        j = int(np.argmin(vals))
        F[t] = vals[j]
        last[t] = taus[j]
        if prune:
            dominated = (F[taus] + seg > F[t]) & (pruned_at == never)
            pruned_at = np.where(dominated, t, pruned_at)

    cps = []
    t = n
    while t > 0:
        t = int(last[t])
        if t > 0:
            cps.append(t)
    cps.reverse()
    return Segmentation(
        changepoints=tuple(cps),
        total_cost=float(F[n]),
        n=n,
        penalty=beta,
        cost_kind=cost,
        min_segment_len=m,
        dates=dates,
    )


def pelt(series, cfg: PeltConfig) -> Segmentation:
    """Exact minimizer of the penalized cost via pruned dynamic programming."""
    return _solve(series, cfg, prune=True)


def optimal_partition_oracle(series, cfg: PeltConfig) -> Segmentation:
    """Unpruned O(n^2) optimal partitioning; refuses series longer than 10,000."""
    n = len(series.values) if isinstance(series, DailySeries) else len(series)
    if n > ORACLE_MAX_N:
        raise SizeGuardError(f"oracle refuses n={n} > {ORACLE_MAX_N}")
    return _solve(series, cfg, prune=False)


def segmentation_cost(values, changepoints: Sequence[int], cfg: PeltConfig) -> float:
    """Penalized cost of an arbitrary changepoint set under ``cfg``."""
    x = finite_or_raise(values)
    stats = CumulativeStats(x, cfg.known_mean)
    bounds = (0, *changepoints, len(x))
    total = len(changepoints) * cfg.penalty
    for a, b in zip(bounds, bounds[1:]):
        if b - a < cfg.min_segment_len:
            raise DegenerateSegmentError(f"segment {a + 1}..{b} shorter than min_segment_len")
        total += segment_cost(stats, a + 1, b, cfg.cost)
    return float(total)
