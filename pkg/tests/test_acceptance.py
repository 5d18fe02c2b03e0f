"""Exit criteria. Each test records one PASS/FAIL line, shown in the terminal summary."""

import math
import time
from collections import Counter

import numpy as np
import pytest

from capflows.changepoint import CostKind, PeltConfig, optimal_partition_oracle, pelt
from capflows.cli import main
from capflows.clustering import (KMeansConfig, hartigan_wong_run, kmeans_exact_1d,
                                 kmeans_hartigan_wong, plusplus_seeds, quantile_seeds)
from capflows.episodes import percentile
from capflows.fixtures import reproduce_fixtures
from capflows.trend import classify_signs, moving_average
from capflows.volatility import GarchParams, garch_filter, garch_fit, simulate_garch
from conftest import ACCEPTANCE_LINES
from cp_oracles import enumerate_best
from toy import write_toy

pytestmark = pytest.mark.acceptance


def record(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _raw(checks):
    """Counts of checks that match the printed tables with and without errata."""
    c = Counter(ch.status for ch in checks)
    return c["pass"], c["erratum"], c["fail"]


def test_1_fixture_tables_2_3():
    t0 = time.perf_counter()
    rep = reproduce_fixtures()
    elapsed = time.perf_counter() - t0
    place = rep.group("placement")
    rows = rep.group("table2") + rep.group("table3")
    country_rows = [c for c in rows if not c.name.endswith("grand total")]
    totals = [c for c in rows if c.name.endswith("grand total")]
    brazil = next(c for c in rows if c.name == "threshold Brazil")
    moved = sum(c.got for c in place)
    p_exact, p_err, p_fail = _raw(place)
    r_exact, r_err, r_fail = _raw(country_rows)
    ok = (p_fail == 0 and r_fail == 0 and len(country_rows) == 28 and len(place) == 28
          and all(c.status == "pass" and c.got == 190 for c in totals)
          and brazil.got == (5, 7, 3) and brazil.status == "pass" and elapsed < 1.0)
    record(1, ok, f"placement {p_exact}/28 rows exact, {p_err} via declared errata ({moved} dates), "
                  f"{p_fail} fail; regime sums {r_exact}/28 exact, {r_err} via errata, {r_fail} fail; "
                  f"Brazil threshold {brazil.got}; grand totals {[c.got for c in totals]}; {elapsed:.3f} s")
    assert ok, rep.render()


def test_2_table_1_and_spans():
    t0 = time.perf_counter()
    rep = reproduce_fixtures()
    elapsed = time.perf_counter() - t0
    t1 = rep.group("table1")
    spans = rep.group("spans")
    errata = rep.group("errata")
    totals = {c.name: c.got for c in t1 if "total" in c.name}
    printed = {c.name: c.got for c in spans if "printed" in c.name}
    e, x, f = _raw(t1 + spans)
    ok = f == 0 and all(c.status == "pass" for c in errata) and len(t1) == 32 and elapsed < 1.0
    record(2, ok, f"Table 1 + spans: {e} exact, {x} via declared errata, {f} fail; "
                  f"totals {list(totals.values())} (printed 62/72/61/50); "
                  f"printed-column spans {list(printed.values())} (text 222/226/236/153); {elapsed:.3f} s")
    assert ok, rep.render()


def _series(rng, n):
    k = int(rng.integers(1, 6))
    cuts = np.sort(rng.choice(np.arange(1, n), size=min(k - 1, n - 1), replace=False))
    out = np.empty(n)
    for idx in np.split(np.arange(n), cuts):
        out[idx] = rng.normal(rng.normal(0, 2), rng.choice([0.3, 1.0, 3.0, 10.0]), len(idx))
    return out


def test_3_pelt_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    kinds = list(CostKind)
    worst, mismatched = 0.0, 0
    for i in range(500):
        n = int(rng.integers(20, 201))
        kind = kinds[i % 3]
        beta = float(rng.choice([0.0, 1.0, math.log(n), 2 * math.log(n), 25.0]))
        m = max(int(rng.integers(1, 6)), kind.min_points)
        cfg = PeltConfig(kind, beta, min_segment_len=m)
        y = _series(rng, n)
        a, b = pelt(y, cfg), optimal_partition_oracle(y, cfg)
        worst = max(worst, abs(a.total_cost - b.total_cost))
        mismatched += a.changepoints != b.changepoints
    enum_bad = 0
    for i in range(90):
        n = int(rng.integers(2, 13))
        kind = kinds[i % 3]
        beta = float(rng.choice([0.0, 0.5, 2.0, 5.0]))
        m = kind.min_points if i % 2 else 2
        y = _series(rng, n)
        best_cost, best_cps = enumerate_best(y, kind.value, beta, m)
        for solver in (pelt, optimal_partition_oracle):
            s = solver(y, PeltConfig(kind, beta, min_segment_len=m))
            enum_bad += abs(s.total_cost - best_cost) > 1e-9 or s.changepoints != best_cps
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and mismatched == 0 and enum_bad == 0 and elapsed < 30
    record(3, ok, f"500 fuzzed: max |cost diff| {worst:.1e}, {mismatched} changepoint-set mismatches; "
                  f"90 enumerations (n<=12): {enum_bad} mismatches; {elapsed:.1f} s")
    assert ok


def test_4_changepoint_recovery():
    t0 = time.perf_counter()
    n = 400
    cfg = PeltConfig(CostKind.VARIANCE_CHANGE, 2 * math.log(n))
    hits, counts = 0, Counter()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = np.concatenate((rng.normal(0, 1, n // 2), rng.normal(0, 5, n // 2)))
        cps = pelt(y, cfg).changepoints
        counts[len(cps)] += 1
        hits += len(cps) == 1 and abs(cps[0] - n // 2) <= 5
    elapsed = time.perf_counter() - t0
    ok = hits >= 95 and elapsed < 10
    record(4, ok, f"{hits}/100 runs with exactly one changepoint within +-5 of 200 "
                  f"(changepoint counts {dict(sorted(counts.items()))}); {elapsed:.2f} s")
    assert ok


def test_5_kmeans_optimality_gap():
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    worse, below, sep_unequal, sep_total, increases = 0, 0, 0, 0, 0
    for i in range(200):
        n = int(rng.integers(3, 301))
        if i % 2:
            sizes = rng.multinomial(n - 3, [1 / 3] * 3) + 1
            spread = float(rng.uniform(0.1, 5))
            gaps = rng.uniform(10 * spread * 1.0001, 50 * spread, 3)
            x = np.concatenate([c + rng.uniform(-spread / 2, spread / 2, s)
                                for c, s in zip(np.cumsum(gaps), sizes)])
            rng.shuffle(x)
        else:
            maker = [lambda: rng.normal(0, 1, n), lambda: rng.exponential(2, n),
                     lambda: np.round(rng.normal(0, 3, n), 1), lambda: rng.standard_t(2, n)][i // 2 % 4]
            x = maker()
            if np.unique(x).size < 3:
                x = np.concatenate((x, [-50.0, 0.5, 50.0]))[:max(n, 3)]
        cfg = KMeansConfig(k=3, restarts=10, rng_seed=i)
        hw = kmeans_hartigan_wong(x, cfg)
        ex = kmeans_exact_1d(x, 3)
        tol = 1e-9 * max(1.0, ex.within_ss)
        below += hw.within_ss < ex.within_ss - tol
        worse += hw.within_ss > ex.within_ss + tol
        if i % 2:
            sep_total += 1
            sep_unequal += hw.within_ss > ex.within_ss + tol
        # every restart, not only the winner, must be monotone
        for r in range(cfg.restarts):
            seeds = quantile_seeds(x, 3) if r == 0 else plusplus_seeds(x, 3, np.random.default_rng([i, r]))
            h = hartigan_wong_run(x, seeds, cfg.max_sweeps).ss_history
            increases += sum(b > a * (1 + 1e-12) + 1e-12 for a, b in zip(h, h[1:]))
    elapsed = time.perf_counter() - t0
    ok = below == 0 and sep_unequal == 0 and increases == 0 and elapsed < 20
    record(5, ok, f"200 instances: {below} below exact, {worse} above exact (allowed on random data), "
                  f"{sep_unequal}/{sep_total} well-separated not optimal, {increases} per-sweep increases "
                  f"over 2000 runs; {elapsed:.1f} s")
    assert ok


def test_6_garch_recovery():
    t0 = time.perf_counter()
    true = GarchParams(0.1, 0.1, 0.8)
    p = garch_fit(simulate_garch(true, 5000, np.random.default_rng(2024)))
    x = np.random.default_rng(1).normal(0, 2, 500)
    flat = garch_filter(x, GarchParams(0.37, 0.0, 0.0))
    elapsed = time.perf_counter() - t0
    ok = (abs(p.alpha - 0.1) <= 0.05 and abs(p.beta_g - 0.8) <= 0.07
          and abs(p.unconditional_variance - 1.0) <= 0.15
          and bool(np.all(flat[1:] == 0.37)) and elapsed < 30)
    record(6, ok, f"alpha {p.alpha:.4f}, beta_g {p.beta_g:.4f}, unconditional variance "
                  f"{p.unconditional_variance:.4f}; alpha=beta_g=0 gives constant omega for t>=2: "
                  f"{bool(np.all(flat[1:] == 0.37))}; {elapsed:.2f} s")
    assert ok


def _oracle_quantile(values, p):
    v = sorted(values)
    pos = (len(v) - 1) * p
    i = int(pos)
    frac = pos - i
    return v[i] if frac == 0 else (1 - frac) * v[i] + frac * v[i + 1]


def test_7_percentile_ma_sign_oracles():
    rng = np.random.default_rng(5)
    worst_q = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 120))
        vals = (rng.normal(0, 10, n) if rng.random() < 0.7 else rng.integers(-5, 6, n).astype(float)).tolist()
        p = float(rng.choice([0.3, 0.7, 0.0, 1.0, rng.random()]))
        worst_q = max(worst_q, abs(percentile(vals, p) - _oracle_quantile(vals, p)))
    worst_ma = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 400))
        y = 100 + np.cumsum(rng.normal(0, 1, n))
        w = int(rng.integers(1, n + 1))
        naive = [sum(y[max(0, i - w + 1): i + 1]) / (i + 1 - max(0, i - w + 1)) for i in range(n)]
        worst_ma = max(worst_ma, float(np.max(np.abs(moving_average(y, w) - naive))))
    flips = 0
    for _ in range(100):
        y = 1000 + np.cumsum(rng.normal(0, 5, 300))
        taus = sorted(rng.choice(np.arange(1, 300), 10, replace=False).tolist())
        a, b = float(rng.uniform(0.01, 100)), float(rng.uniform(0, 1e4))
        flips += [c.sign for c in classify_signs(y, taus)] != [c.sign for c in classify_signs(a * y + b, taus)]
    ok = worst_q <= 1e-12 and worst_ma <= 1e-10 and flips == 0
    record(7, ok, f"quantile max err {worst_q:.1e} over 1000; MA max err {worst_ma:.1e} over 200; "
                  f"{flips}/100 affine cases changed a sign")
    assert ok


def test_8_determinism(tmp_path, capsys):
    flows, index = write_toy(tmp_path, countries=("AAA", "BBB", "CCC"))
    a, b, c = (tmp_path / d for d in "abc")
    assert main(["run", "--flows", str(flows), "--index", str(index), "--out", str(a),
                 "--garch", "aggregate", "--seed", "123"]) == 0
    for d in (b, c):
        assert main(["run", "--manifest", str(a / "manifest.json"), "--out", str(d)]) == 0
    capsys.readouterr()

    def files(d):
        return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}

    fa, fb, fc = files(a), files(b), files(c)
    ok = fa == fb == fc and len(fa) > 5
    record(8, ok, f"{len(fa)} files byte-identical across the original run and two manifest reruns")
    assert ok
