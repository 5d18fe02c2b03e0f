"""One-dimensional k-means: Hartigan-Wong point moves plus an exact DP reference."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import finite_or_raise
from .episodes import FlowLabel
from .errors import ConfigError, DegeneracyError, SizeGuardError

EXACT_MAX_N = 5_000
# relative margin a move must beat; keeps round-off from cycling points
_MOVE_TOL = 1e-12


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 3
    max_sweeps: int = 100
    restarts: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.max_sweeps < 1:
            raise ConfigError("max_sweeps must be at least 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class KMeansResult:
    """Clusters are numbered in ascending centroid order."""

    assignments: np.ndarray
    centroids: np.ndarray
    within_ss: float
    sweeps_used: int = 0
    seed: int | None = None
    restart: int | None = None
    ss_history: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {
            "assignments": [int(a) for a in self.assignments],
            "centroids": [float(c) for c in self.centroids],
            "within_ss": self.within_ss,
            "seed": self.seed,
        }


def within_ss(x: np.ndarray, assignments: np.ndarray, k: int) -> float:
    total = 0.0
    for c in range(k):
        pts = x[assignments == c]
        if pts.size:
            total += float(np.sum((pts - pts.mean()) ** 2))
    return total


def _finish(x, assignments, k, **extra) -> KMeansResult:
    """Renumber clusters by centroid and recompute everything from assignments."""
    means = np.array([x[assignments == c].mean() for c in range(k)])
    order = np.argsort(means, kind="stable")
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    a = remap[assignments]
    a.setflags(write=False)
    cents = means[order]
    cents.setflags(write=False)
    return KMeansResult(a, cents, within_ss(x, a, k), **extra)


def _check_input(values, k) -> np.ndarray:
    x = finite_or_raise(values, "flow values")
    if np.unique(x).size < k:
        raise DegeneracyError(f"need at least {k} distinct values, got {np.unique(x).size}")
    return x


def quantile_seeds(x: np.ndarray, k: int) -> np.ndarray:
    """Distinct data values nearest the (2j+1)/(2k) quantiles."""
    u = np.unique(x)
    targets = np.quantile(x, (2 * np.arange(k) + 1) / (2 * k))
    idx = np.clip(np.searchsorted(u, targets), 0, u.size - 1)
    # pick the nearer neighbour, then force strictly increasing indices
    left = np.clip(idx - 1, 0, u.size - 1)
    idx = np.where(np.abs(u[left] - targets) <= np.abs(u[idx] - targets), left, idx)
    for j in range(1, k):
        idx[j] = max(idx[j], idx[j - 1] + 1)
    for j in range(k - 1, -1, -1):
        idx[j] = min(idx[j], u.size - k + j)
        if j < k - 1:
            idx[j] = min(idx[j], idx[j + 1] - 1)
    return u[idx]


def plusplus_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k distinct data values drawn by D^2 weighting over the distinct values."""
    u = np.unique(x)
    chosen = [int(rng.integers(u.size))]
    d2 = (u - u[chosen[0]]) ** 2
    while len(chosen) < k:
        total = d2.sum()
        j = int(rng.choice(u.size, p=d2 / total))
        chosen.append(j)
        d2 = np.minimum(d2, (u - u[j]) ** 2)
    return np.sort(u[chosen])


def hartigan_wong_run(values: Sequence[float], seeds: Sequence[float],
                      max_sweeps: int = 100) -> KMeansResult:
    """One Hartigan-Wong descent from the given initial centroids.

    Points are visited in ascending value order, so the outcome does not
    depend on how the input happens to be ordered.
    """
    x = finite_or_raise(values)
    seeds = np.asarray(seeds, dtype=float)
    k = seeds.size
    a = np.argmin(np.abs(x[:, None] - seeds[None, :]), axis=1)
    size = np.bincount(a, minlength=k).astype(float)
    if np.any(size == 0):
        raise DegeneracyError("initial centroids leave a cluster empty")
    mean = np.array([x[a == c].mean() for c in range(k)])
    history = [within_ss(x, a, k)]

    order = np.argsort(x, kind="stable")
    xs = x.tolist()
    al = a.tolist()
    nl = size.tolist()
    ml = mean.tolist()
    # live-set bookkeeping: a point is re-examined only when some cluster
    # has changed since its last examination
    step = 0
    last_change = [0] * k
    last_seen = [-1] * x.size
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        moved = False
        for i in order.tolist():
            step += 1
            if last_seen[i] >= max(last_change):
                continue
            last_seen[i] = step
            src = al[i]
            n_a = nl[src]
            if n_a <= 1:
                continue
            xi = xs[i]
            remove = n_a * (xi - ml[src]) ** 2 / (n_a - 1)
            best, best_c = remove * (1.0 - _MOVE_TOL), -1
            for c in range(k):
                if c != src:
                    add = nl[c] * (xi - ml[c]) ** 2 / (nl[c] + 1)
                    if add < best:
                        best, best_c = add, c
            if best_c < 0:
                continue
            ml[src] = (n_a * ml[src] - xi) / (n_a - 1)
            nl[src] = n_a - 1
            ml[best_c] = (nl[best_c] * ml[best_c] + xi) / (nl[best_c] + 1)
            nl[best_c] += 1
            al[i] = best_c
            # a point that just moved is already at its best cluster
            last_change[src] = last_change[best_c] = step
            moved = True
        a = np.array(al)
        if min(np.bincount(a, minlength=k)) == 0:
            raise AssertionError("a cluster emptied during Hartigan-Wong sweeps")
        history.append(within_ss(x, a, k))
        if not moved:
            break
    return _finish(x, a, k, sweeps_used=sweeps, ss_history=tuple(history))


def kmeans_hartigan_wong(values: Sequence[float], cfg: KMeansConfig = KMeansConfig()) -> KMeansResult:
    """Best of ``cfg.restarts`` Hartigan-Wong runs by within-cluster SS.

    Restart 0 seeds at data quantiles; restart r > 0 seeds with k-means++
    draws from ``default_rng([rng_seed, r])``.
    """
    x = _check_input(values, cfg.k)
    best = None
    for r in range(cfg.restarts):
        if r == 0:
            seeds = quantile_seeds(x, cfg.k)
        else:
            seeds = plusplus_seeds(x, cfg.k, np.random.default_rng([cfg.rng_seed, r]))
        res = hartigan_wong_run(x, seeds, cfg.max_sweeps)
        if best is None or res.within_ss < best.within_ss:
            best = KMeansResult(res.assignments, res.centroids, res.within_ss,
                                res.sweeps_used, cfg.rng_seed, r, res.ss_history)
    return best


def kmeans_exact_1d(values: Sequence[float], k: int) -> KMeansResult:
    """Globally optimal 1-D k-means by DP over contiguous runs of sorted values."""
    x = _check_input(values, k)
    n = x.size
    if n > EXACT_MAX_N:
        raise SizeGuardError(f"exact k-means refuses n={n} > {EXACT_MAX_N}")
    order = np.argsort(x, kind="stable")
    v = x[order]
    vc = (v - v.mean()).astype(np.longdouble)
    s1 = np.concatenate(([0], np.cumsum(vc)))
    s2 = np.concatenate(([0], np.cumsum(vc * vc)))

    def ss(lo, hi):
        # cost of sorted values lo..hi-1 for arrays of lo, scalar hi
        cnt = hi - lo
        a = s1[hi] - s1[lo]
        return np.maximum(s2[hi] - s2[lo] - a * a / cnt, 0).astype(float)

    # D[j, i]: best cost of the first i sorted values in j+1 clusters
    D = np.full((k, n + 1), np.inf)
    arg = np.zeros((k, n + 1), dtype=np.int64)
    D[0, 1:] = ss(np.zeros(n, dtype=np.int64), np.arange(1, n + 1))
    for j in range(1, k):
        for i in range(j + 1, n + 1):
            lo = np.arange(j, i)
            cand = D[j - 1, lo] + ss(lo, i)
            m = int(np.argmin(cand))
            D[j, i] = cand[m]
            arg[j, i] = lo[m]
    labels_sorted = np.empty(n, dtype=np.int64)
    hi = n
    for j in range(k - 1, -1, -1):
        lo = arg[j, hi] if j > 0 else 0
        labels_sorted[lo:hi] = j
        hi = lo
    a = np.empty(n, dtype=np.int64)
    a[order] = labels_sorted
    return _finish(x, a, k)


def label_by_cluster_mean(result: KMeansResult) -> list[FlowLabel]:
    """Highest centroid is Surge, lowest Outflow, the middle one Normal."""
    cents = np.asarray(result.centroids)
    if cents.size != 3:
        raise ConfigError(f"label mapping needs k = 3, got {cents.size}")
    if np.unique(cents).size < 3:
        raise DegeneracyError(f"tied centroids {cents.tolist()}")
    rank = np.argsort(np.argsort(cents))
    names = (FlowLabel.OUTFLOW, FlowLabel.NORMAL, FlowLabel.SURGE)
    return [names[rank[c]] for c in result.assignments]
