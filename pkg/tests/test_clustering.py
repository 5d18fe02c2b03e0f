import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capflows.clustering import (
    KMeansConfig,
    KMeansResult,
    hartigan_wong_run,
    kmeans_exact_1d,
    kmeans_hartigan_wong,
    label_by_cluster_mean,
    plusplus_seeds,
    quantile_seeds,
)
from capflows.episodes import FlowLabel
from capflows.errors import ConfigError, DegeneracyError, SizeGuardError

S, N, O = FlowLabel.SURGE, FlowLabel.NORMAL, FlowLabel.OUTFLOW


def brute_force_ss(x, k):
    """Minimum within-cluster SS over every assignment with no empty cluster."""
    x = np.asarray(x, dtype=float)
    best = np.inf
    for a in itertools.product(range(k), repeat=len(x)):
        a = np.array(a)
        if len(set(a.tolist())) < k:
            continue
        ss = sum(float(np.sum((x[a == c] - x[a == c].mean()) ** 2)) for c in range(k))
        best = min(best, ss)
    return best


def separated(rng, sizes, spread=1.0):
    gaps = rng.uniform(10 * spread + 1e-6, 40 * spread, len(sizes))
    centers = np.cumsum(gaps)
    x = np.concatenate([c + rng.uniform(-spread / 2, spread / 2, s) for c, s in zip(centers, sizes)])
    rng.shuffle(x)
    return x


def test_perfect_groups():
    res = kmeans_hartigan_wong([0, 0, 0, 10, 10, 10, 20, 20, 20])
    assert res.within_ss == 0
    assert res.assignments.tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2]
    assert res.centroids.tolist() == [0, 10, 20]


def test_exact_examples():
    assert kmeans_exact_1d([1, 2, 100, 101], 2).within_ss == pytest.approx(1.0)
    assert kmeans_exact_1d([3.0, 1.0, 2.0, 7.0], 4).within_ss == 0.0


@pytest.mark.parametrize("seed", range(30))
def test_exact_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    k = int(rng.integers(2, min(n, 4) + 1))
    x = np.round(rng.normal(0, 5, n), 2)
    if np.unique(x).size < k:
        return
    assert kmeans_exact_1d(x, k).within_ss == pytest.approx(brute_force_ss(x, k), abs=1e-9)


def test_errors():
    with pytest.raises(DegeneracyError):
        kmeans_hartigan_wong([1.0, 1.0, 2.0, 2.0])
    with pytest.raises(DegeneracyError):
        kmeans_exact_1d([1.0, 1.0, 1.0], 2)
    with pytest.raises(SizeGuardError):
        kmeans_exact_1d(np.arange(5001.0), 3)
    with pytest.raises(ConfigError):
        KMeansConfig(k=1)
    with pytest.raises(ConfigError):
        KMeansConfig(max_sweeps=0)


def test_seeding_is_distinct_and_in_data():
    rng = np.random.default_rng(0)
    x = np.concatenate([np.zeros(50), [1.0, 2.0]])
    s0 = quantile_seeds(x, 3)
    assert np.unique(s0).size == 3 and set(s0) <= set(x)
    s1 = plusplus_seeds(x, 3, rng)
    assert np.unique(s1).size == 3 and set(s1) <= set(x)


def test_restart_seeding_is_reproducible():
    x = np.random.default_rng(1).normal(0, 1, 60)
    a = kmeans_hartigan_wong(x, KMeansConfig(rng_seed=99))
    b = kmeans_hartigan_wong(x, KMeansConfig(rng_seed=99))
    assert a.within_ss == b.within_ss and a.assignments.tolist() == b.assignments.tolist()


def test_label_by_cluster_mean():
    res = KMeansResult(np.array([0, 1, 2, 1]), np.array([-5.0, 0.2, 6.0]), 0.0)
    assert label_by_cluster_mean(res) == [O, N, S, N]
    # order comes from centroid values, not from cluster numbering
    res = KMeansResult(np.array([0, 1, 2]), np.array([6.0, -5.0, 0.2]), 0.0)
    assert label_by_cluster_mean(res) == [S, O, N]
    with pytest.raises(DegeneracyError):
        label_by_cluster_mean(KMeansResult(np.array([0, 1, 2]), np.array([1.0, 1.0, 2.0]), 0.0))


def check_result(x, res, k):
    x = np.asarray(x, dtype=float)
    assert sorted(set(res.assignments.tolist())) == list(range(k))
    cents = np.array([x[res.assignments == c].mean() for c in range(k)])
    np.testing.assert_allclose(res.centroids, cents, rtol=0, atol=1e-9)
    ss = sum(float(np.sum((x[res.assignments == c] - cents[c]) ** 2)) for c in range(k))
    assert res.within_ss == pytest.approx(ss, abs=1e-9)


values_strategy = st.lists(st.floats(-1e3, 1e3).map(lambda v: round(v, 3)), min_size=3, max_size=120)


@settings(max_examples=80, deadline=None)
@given(values_strategy, st.integers(0, 2**64 - 1))
def test_heuristic_never_beats_exact(values, seed):
    if np.unique(values).size < 3:
        return
    h = kmeans_hartigan_wong(values, KMeansConfig(rng_seed=seed))
    e = kmeans_exact_1d(values, 3)
    check_result(values, h, 3)
    check_result(values, e, 3)
    assert h.within_ss >= e.within_ss - 1e-9 * max(1.0, e.within_ss)
    # optimal 1-D clusters are contiguous in value
    lab = label_by_cluster_mean(e)
    x = np.asarray(values)
    surge = x[[lab_ is S for lab_ in lab]]
    out = x[[lab_ is O for lab_ in lab]]
    assert surge.min() >= out.max()


@settings(max_examples=60, deadline=None)
@given(values_strategy, st.integers(0, 2**64 - 1), st.integers(0, 9))
def test_sweeps_never_increase_objective(values, seed, restart):
    x = np.asarray(values)
    if np.unique(x).size < 3:
        return
    if restart == 0:
        seeds = quantile_seeds(x, 3)
    else:
        seeds = plusplus_seeds(x, 3, np.random.default_rng([seed, restart]))
    hist = hartigan_wong_run(x, seeds).ss_history
    assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(hist, hist[1:]))


@settings(max_examples=40, deadline=None)
@given(values_strategy, st.randoms(use_true_random=False))
def test_permutation_leaves_objective_unchanged(values, rnd):
    if np.unique(values).size < 3:
        return
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a = kmeans_hartigan_wong(values, KMeansConfig(restarts=1))
    b = kmeans_hartigan_wong(shuffled, KMeansConfig(restarts=1))
    assert a.within_ss == pytest.approx(b.within_ss, rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-100, 100).map(lambda v: round(v, 2)))
def test_shift_equivariance(seed, shift):
    rng = np.random.default_rng(seed)
    x = np.round(rng.normal(0, 3, int(rng.integers(5, 80))), 2)
    if np.unique(x).size < 3:
        return
    for solve in (lambda v: kmeans_hartigan_wong(v, KMeansConfig(rng_seed=seed)),
                  lambda v: kmeans_exact_1d(v, 3)):
        a, b = solve(x), solve(x + shift)
        assert a.assignments.tolist() == b.assignments.tolist()
        np.testing.assert_allclose(b.centroids, a.centroids + shift, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-6, 6))
def test_scale_equivariance(seed, e):
    # powers of two rescale exactly, so labels must not move at all
    c = 2.0 ** e
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 3, int(rng.integers(5, 80)))
    for solve in (lambda v: kmeans_hartigan_wong(v, KMeansConfig(rng_seed=seed)),
                  lambda v: kmeans_exact_1d(v, 3)):
        a, b = solve(x), solve(c * x)
        assert a.assignments.tolist() == b.assignments.tolist()
        np.testing.assert_allclose(b.centroids, c * a.centroids, rtol=1e-12)
        assert label_by_cluster_mean(a) == label_by_cluster_mean(b)


@pytest.mark.parametrize("sizes", [(3, 3, 3), (2, 50, 2), (100, 1, 40), (5, 5, 290)])
def test_well_separated_reaches_optimum(sizes):
    rng = np.random.default_rng(sum(sizes))
    x = separated(rng, sizes)
    assert kmeans_hartigan_wong(x).within_ss == kmeans_exact_1d(x, 3).within_ss
