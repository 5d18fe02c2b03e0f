"""End-to-end run: flows -> episodes, index -> signed changepoints, join -> tallies.

Countries are processed independently; an error in one is recorded and never
touches another country's results. All outputs are plain CSV/JSON written with
stable ordering and float formatting, so a rerun of the same manifest is
byte-identical. The manifest is written last.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .changepoint import CostKind, PeltConfig, Segmentation, default_penalty, pelt
from .clustering import KMeansConfig, KMeansResult, kmeans_hartigan_wong, label_by_cluster_mean
from .core import DailySeries, QuarterlySeries, date_to_quarter, quarter_span
from .episodes import Episode, FlowLabel, ThresholdConfig, extract_episodes, label_by_threshold
from .errors import CapflowsError, ConfigError, InputError
from .io import episode_rows, fmt, sha256_of, write_csv, write_episodes, write_json
from .join import CELLS, EpisodeTally, assign, format_table, tally, total_row
from .plot import plot_rows, render_svg, write_plot_csv
from .trend import SignedChangepoint, TrendConfig, classify_signs, moving_average
from .volatility import fit_garch, garch_filter

APPROACH_CHOICES = ("threshold", "clustering", "both")
FORMATS = ("txt", "plot")
GARCH_MODES = ("none", "aggregate", "country")


@dataclass(frozen=True)
class CountryDataset:
    country: str
    flows: QuarterlySeries
    index: DailySeries

    def __post_init__(self):
        if not self.country:
            raise InputError("country code must be non-empty")
        if len(self.flows) == 0 or len(self.index) == 0:
            raise InputError(f"{self.country}: both series must be non-empty")


@dataclass(frozen=True)
class RunConfig:
    """``auto_penalty`` replaces ``pelt.penalty`` by the default for each series length.

    ``use_returns`` segments daily log-returns instead of levels; changepoints
    are reported at the level whose return closes the segment. ``garch`` fits
    the flow series summed over countries ("aggregate") or per country.
    """

    approach: str = "both"
    pelt: PeltConfig = PeltConfig(CostKind.VARIANCE_CHANGE, 0.0)
    auto_penalty: bool = True
    threshold: ThresholdConfig = ThresholdConfig()
    kmeans: KMeansConfig = KMeansConfig()
    trend: TrendConfig = TrendConfig()
    use_returns: bool = False
    garch: str = "none"
    out_dir: str = "capflows_out"
    formats: tuple[str, ...] = FORMATS

    def __post_init__(self):
        if self.approach not in APPROACH_CHOICES:
            raise ConfigError(f"approach must be one of {APPROACH_CHOICES}, got {self.approach!r}")
        if self.garch not in GARCH_MODES:
            raise ConfigError(f"garch must be one of {GARCH_MODES}, got {self.garch!r}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown report format(s) {bad}; choose from {FORMATS}")
        object.__setattr__(self, "formats", tuple(self.formats))

    @property
    def approaches(self) -> tuple[str, ...]:
        return ("threshold", "clustering") if self.approach == "both" else (self.approach,)

    def to_dict(self) -> dict:
        """Everything that affects results; the output directory is left out."""
        d = asdict(self)
        d.pop("out_dir")
        d["pelt"]["cost"] = self.pelt.cost.value
        d["formats"] = list(self.formats)
        return d

    @classmethod
    def from_dict(cls, d: Mapping, out_dir: str | None = None) -> "RunConfig":
        try:
            return cls(
                approach=d["approach"],
                pelt=PeltConfig(**d["pelt"]),
                auto_penalty=bool(d["auto_penalty"]),
                threshold=ThresholdConfig(**d["threshold"]),
                kmeans=KMeansConfig(**d["kmeans"]),
                trend=TrendConfig(**d["trend"]),
                use_returns=bool(d["use_returns"]),
                garch=d["garch"],
                formats=tuple(d["formats"]),
                out_dir=out_dir or cls.out_dir,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed run configuration: {exc}") from None


@dataclass
class CountryResult:
    """Everything computed for one country; dicts are keyed by approach."""

    dataset: CountryDataset
    segmentation: Segmentation
    series_kind: str
    signed: list[SignedChangepoint]
    moving_average: np.ndarray
    labels: dict[str, list[FlowLabel]] = field(default_factory=dict)
    episodes: dict[str, list[Episode]] = field(default_factory=dict)
    regimes: dict[str, list[FlowLabel]] = field(default_factory=dict)
    tallies: dict[str, EpisodeTally] = field(default_factory=dict)
    kmeans: KMeansResult | None = None

    @property
    def country(self) -> str:
        return self.dataset.country


@dataclass
class RunResult:
    config: RunConfig
    countries: dict[str, CountryResult]
    failures: dict[str, dict]
    garch: dict[str, dict] = field(default_factory=dict)

    def tallies(self, approach: str) -> list[EpisodeTally]:
        return [r.tallies[approach] for r in self.countries.values()]


def build_datasets(flows: Mapping[str, QuarterlySeries], index: Mapping[str, DailySeries]):
    """Pair flows with indices by country; countries present in only one file are failures."""
    datasets, failures = [], {}
    for c in sorted(set(flows) | set(index)):
        if c not in flows:
            failures[c] = InputError(f"{c}: no flow data").to_dict()
        elif c not in index:
            failures[c] = InputError(f"{c}: no index data").to_dict()
        else:
            datasets.append(CountryDataset(c, flows[c], index[c]))
    return datasets, failures


def segment(series: DailySeries, cfg: RunConfig) -> tuple[Segmentation, list[int]]:
    """Segmentation of levels or returns, plus its changepoints as level positions."""
    if cfg.use_returns:
        values, shift, dates = series.log_returns(), 1, series.dates[1:]
    else:
        values, shift, dates = series.values, 0, series.dates
    pcfg = cfg.pelt
    if cfg.auto_penalty:
        pcfg = replace(pcfg, penalty=default_penalty(pcfg.cost, len(values)))
    seg = pelt(values, pcfg)
    seg = replace(seg, dates=tuple(dates))
    return seg, [t + shift for t in seg.changepoints]


def label_flows(flows: QuarterlySeries, approach: str, cfg: RunConfig):
    """Per-quarter labels under one approach, plus the k-means result when clustering."""
    if approach == "threshold":
        return label_by_threshold(flows, cfg.threshold), None
    km = kmeans_hartigan_wong(flows.values, cfg.kmeans)
    return label_by_cluster_mean(km), km


def process_country(ds: CountryDataset, cfg: RunConfig) -> CountryResult:
    seg, positions = segment(ds.index, cfg)
    signed = classify_signs(ds.index, positions, cfg.trend)
    res = CountryResult(ds, seg, "log_returns" if cfg.use_returns else "levels",
                        signed, moving_average(ds.index, cfg.trend.window))
    start = ds.flows.quarters[0]
    for approach in cfg.approaches:
        labels, km = label_flows(ds.flows, approach, cfg)
        res.kmeans = km or res.kmeans
        eps = extract_episodes(labels, start)
        regimes = assign(eps, signed)
        res.labels[approach] = labels
        res.episodes[approach] = eps
        res.regimes[approach] = regimes
        res.tallies[approach] = tally(regimes, [s.sign for s in signed], ds.country, approach)
    return res


def aggregate_flows(flows: Mapping[str, QuarterlySeries]) -> QuarterlySeries:
    """Sum of all countries' flows over the quarters they share."""
    if not flows:
        raise InputError("no flow series to aggregate")
    first = max(s.quarters[0] for s in flows.values())
    last = min(s.quarters[-1] for s in flows.values())
    if first > last:
        raise InputError("country flow windows do not overlap")
    n = quarter_span(first, last)
    total = np.zeros(n)
    for s in flows.values():
        i = s.quarters.index(first)
        total += s.values[i: i + n]
    return QuarterlySeries.from_start(first, total)


def garch_series(flows: Mapping[str, QuarterlySeries], mode: str) -> dict[str, QuarterlySeries]:
    if mode == "aggregate":
        return {"aggregate": aggregate_flows(flows)}
    if mode == "country":
        return dict(sorted(flows.items()))
    raise ConfigError(f"garch mode must be 'aggregate' or 'country', got {mode!r}")


def fit_series(series: Mapping[str, QuarterlySeries], failures: dict | None = None) -> dict[str, dict]:
    """GARCH fit and variances per named series; failures are recorded when a dict is given."""
    out = {}
    for name, s in series.items():
        try:
            fit = fit_garch(s.values)
        except CapflowsError as exc:
            if failures is None:
                raise
            failures[f"garch:{name}"] = exc.to_dict()
            continue
        out[name] = {"series": s, "fit": fit, "variances": garch_filter(s.values, fit.params)}
    return out


def write_garch(out: Path, fits: Mapping[str, dict]) -> dict:
    rows, params = [], {}
    for name, g in fits.items():
        for q, x, v in zip(g["series"].quarters, g["series"].values, g["variances"]):
            rows.append({"series": name, "quarter": str(q), "flow": fmt(x), "conditional_variance": fmt(v)})
        p = g["fit"].params
        params[name] = {"omega": p.omega, "alpha": p.alpha, "beta_g": p.beta_g, "mu": p.mu,
                        "loglik": g["fit"].loglik, "n": g["fit"].n}
    write_csv(out / "garch.csv", ["series", "quarter", "flow", "conditional_variance"], rows)
    write_json(out / "garch_params.json", params)
    return params


def run_pipeline(datasets: Sequence[CountryDataset], cfg: RunConfig,
                 inputs: Mapping[str, str] | None = None,
                 failures: Mapping[str, dict] | None = None,
                 column: str | None = None, write: bool = True) -> RunResult:
    """Process every country, then write all artifacts and finally the manifest."""
    names = [ds.country for ds in datasets]
    if len(set(names)) != len(names):
        raise ConfigError("country codes must be unique within a run")
    failed = dict(failures or {})
    results = {}
    for ds in sorted(datasets, key=lambda d: d.country):
        try:
            results[ds.country] = process_country(ds, cfg)
        except CapflowsError as exc:
            failed[ds.country] = exc.to_dict()
    garch = {}
    if cfg.garch != "none" and results:
        flows = {c: r.dataset.flows for c, r in results.items()}
        try:
            garch = fit_series(garch_series(flows, cfg.garch), failed)
        except CapflowsError as exc:
            failed["garch:aggregate"] = exc.to_dict()
    run = RunResult(cfg, results, dict(sorted(failed.items())), garch)
    if write:
        write_outputs(run, {k: str(v) for k, v in (inputs or {}).items()}, column)
    return run


def _slug(country: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", country).strip("_") or "country"


def changepoints_json(run: RunResult) -> dict:
    out = {}
    for c, r in run.countries.items():
        regimes = {a: [g.value for g in r.regimes[a]] for a in r.regimes}
        out[c] = {
            "series": r.series_kind,
            "segmentation": r.segmentation.to_json(),
            "changepoints": [
                {"position": s.position, "date": s.date.isoformat(),
                 "quarter": str(date_to_quarter(s.date)), "sign": s.sign.value,
                 **{f"regime_{a}": regimes[a][i] for a in regimes}}
                for i, s in enumerate(r.signed)
            ],
        }
    return {"window": run.config.trend.window, "lookahead": run.config.trend.lookahead, "countries": out}


def tally_rows(tallies: Sequence[EpisodeTally], approach: str) -> list[dict]:
    rows = []
    for t in [*tallies, total_row(tallies, approach)]:
        rows.append({"approach": approach, "country": t.country,
                     **dict(zip(CELLS, t.cells)), "total": t.total})
    return rows


def write_outputs(run: RunResult, inputs: Mapping[str, str], column: str | None = None) -> None:
    cfg = run.config
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def track(name):
        written.append(name)
        return out / name

    # country-scoped artifacts
    for c, r in run.countries.items():
        sub = Path("countries") / _slug(c)
        (out / sub).mkdir(parents=True, exist_ok=True)
        write_csv(track(str(sub / "labels.csv")), ["quarter", *r.labels],
                  ({"quarter": str(q), **{a: r.labels[a][i].value for a in r.labels}}
                   for i, q in enumerate(r.dataset.flows.quarters)))
        if "plot" in cfg.formats:
            for a in cfg.approaches:
                rows = plot_rows(r.dataset.index, r.moving_average, r.signed, r.episodes[a])
                write_plot_csv(track(str(sub / f"plot_{a}.csv")), rows)
                track(str(sub / f"plot_{a}.svg")).write_text(
                    render_svg(f"{c} ({a})", rows), encoding="utf-8")

    # run-level artifacts
    ep_rows = [row for c, r in run.countries.items() for a in cfg.approaches
               for row in episode_rows(c, a, r.episodes[a])]
    write_episodes(track("episodes.csv"), ep_rows)
    write_json(track("changepoints.json"), changepoints_json(run))
    tally_all = [row for a in cfg.approaches for row in tally_rows(run.tallies(a), a)]
    write_csv(track("tally.csv"), ["approach", "country", *CELLS, "total"], tally_all)
    if "txt" in cfg.formats:
        for a in cfg.approaches:
            track(f"tally_{a}.txt").write_text(format_table(run.tallies(a)), encoding="utf-8")
    audit = [{"country": c, "approach": a, "position": s.position, "date": s.date.isoformat(),
              "quarter": str(date_to_quarter(s.date)), "regime": r.regimes[a][i].value,
              "sign": s.sign.value}
             for c, r in run.countries.items() for a in cfg.approaches for i, s in enumerate(r.signed)]
    write_csv(track("audit.csv"), ["country", "approach", "position", "date", "quarter", "regime", "sign"], audit)
    if run.garch:
        write_garch(out, run.garch)
        written += ["garch.csv", "garch_params.json"]

    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "seeds": {"kmeans": cfg.kmeans.rng_seed},
        "column": column,
        "inputs": {k: {"path": v, "sha256": sha256_of(v)} for k, v in sorted(inputs.items())},
        "countries": list(run.countries),
        "failures": run.failures,
        "outputs": {name: sha256_of(out / name) for name in sorted(written)},
    }
    write_json(out / "manifest.json", manifest)

