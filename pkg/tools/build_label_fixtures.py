"""Regenerate data/labels.csv and the synthetic Chile flow files.

labels.csv holds, per approach and country, one S/N/O code per quarter from
2000Q1 to 2017Q1, built from the curated episode tables (quarters outside an
episode are N).

The Chile flow files are synthetic quarterly series whose labels under each
approach reproduce Chile's published episodes:

* threshold: with 69 quarters and p = 0.3 exactly 21 values sit above the
  upper and 21 below the lower percentile, so isolated single quarters are
  added until both counts reach 21 (singletons never form an episode);
* clustering: three tight, well separated value groups.
"""

import csv
import sys
from pathlib import Path


from capflows.episodes import FlowLabel, labels_from_episodes
from capflows.fixtures import FIRST_QUARTER, N_QUARTERS, build_label_rows, load_fixtures

DATA = Path(__file__).resolve().parents[1] / "src" / "capflows" / "data"
S, N, O = FlowLabel.SURGE, FlowLabel.NORMAL, FlowLabel.OUTFLOW


def pad_singletons(labels, target=21):
    """Turn Normal quarters with Normal neighbours into isolated S/O until each hits target."""
    labels = list(labels)
    for kind in (S, O):
        i = 0
        while labels.count(kind) < target:
            if i >= len(labels):
                raise SystemExit(f"cannot place enough isolated {kind.value} quarters")
            left = labels[i - 1] if i > 0 else N
            right = labels[i + 1] if i + 1 < len(labels) else N
            if labels[i] is N and left is N and right is N:
                labels[i] = kind
                i += 2
            else:
                i += 1
    return labels


def flows_for(labels, spread):
    """Distinct values: Surge high, Outflow low, Normal in between."""
    out = []
    for i, lab in enumerate(labels):
        base = {S: 10.0, N: 0.0, O: -10.0}[lab]
        out.append(round(base + spread * ((i * 7) % 23 - 11) / 11, 4))
    return out


def write_flows(path, country, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "quarter", "net_flow_pct_gdp"])
        for i, v in enumerate(values):
            w.writerow([country, str(FIRST_QUARTER + i), f"{v:.4f}"])


def main():
    fx = load_fixtures()
    with open(DATA / "labels.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["approach", "country", "first_quarter", "labels"], lineterminator="\n")
        w.writeheader()
        w.writerows(build_label_rows(fx))

    thr = labels_from_episodes(fx.episodes("threshold")["Chile"], FIRST_QUARTER, N_QUARTERS)
    write_flows(DATA / "chile_flows_threshold.csv", "Chile", flows_for(pad_singletons(thr), 2.0))
    clu = labels_from_episodes(fx.episodes("clustering")["Chile"], FIRST_QUARTER, N_QUARTERS)
    write_flows(DATA / "chile_flows_clustering.csv", "Chile", flows_for(clu, 0.5))
    return 0


if __name__ == "__main__":
    sys.exit(main())
