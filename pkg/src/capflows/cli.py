"""Command-line interface.

Every failure prints one JSON object to stderr and exits nonzero: 1 for data
and processing errors, 2 for usage errors. The default output directory is
taken from ``CAPFLOWS_OUT`` when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .changepoint import CostKind, PeltConfig
from .clustering import KMeansConfig
from .core import parse_date
from .episodes import ThresholdConfig, extract_episodes
from .errors import CapflowsError, ConfigError, InputError
from .fixtures import reproduce_fixtures
from .io import (episode_rows, load_flows, load_index, read_episodes, read_json, sha256_of,
                 write_csv, write_episodes, write_json)
from .join import CELLS, assign, format_table, tally
from .pipeline import (APPROACH_CHOICES, FORMATS, GARCH_MODES, RunConfig, build_datasets,
                       fit_series, garch_series, label_flows, run_pipeline, segment, tally_rows,
                       write_garch)
from .trend import Sign, TrendConfig, classify_signs

ENV_OUT = "CAPFLOWS_OUT"


class UsageError(ConfigError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _penalty(text: str):
    if text == "auto":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an unsigned integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _out(args) -> Path:
    out = Path(args.out or os.environ.get(ENV_OUT) or "capflows_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_common(p, flows=False, index=False):
    p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./capflows_out)")
    if flows:
        p.add_argument("--flows", required=True, help="CSV: country,quarter,<flow column>")
        p.add_argument("--column", help="flow column when the file has more than one candidate")
    if index:
        p.add_argument("--index", required=True, help="CSV: country,date,close")


def _add_episode_flags(p):
    p.add_argument("--approach", choices=APPROACH_CHOICES, default="both")
    p.add_argument("--percentile", type=float, default=0.30)
    p.add_argument("--seed", type=_u64, default=0, help="k-means restart seed")
    p.add_argument("--restarts", type=int, default=10)


def _add_cp_flags(p):
    p.add_argument("--cost", choices=[c.value for c in CostKind], default="variance")
    p.add_argument("--penalty", type=_penalty, default=None, help="float or 'auto' (default)")
    p.add_argument("--min-seg", type=int, default=None, help="minimum segment length")
    p.add_argument("--window", type=int, default=25)
    p.add_argument("--horizon", type=int, default=None, help="sign lookahead (default: window)")
    p.add_argument("--returns", action="store_true", help="segment daily log-returns")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="capflows", description="Capital-flow episodes and stock-index changepoints.")
    ap.add_argument("--version", action="version", version=f"capflows {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("episodes", help="label flows and extract Surge/Outflow episodes")
    _add_common(p, flows=True)
    _add_episode_flags(p)

    p = sub.add_parser("changepoints", help="segment index series and sign each changepoint")
    _add_common(p, index=True)
    _add_cp_flags(p)

    p = sub.add_parser("garch", help="GARCH(1,1) conditional variances of quarterly flows")
    _add_common(p, flows=True)
    p.add_argument("--mode", choices=GARCH_MODES[1:], default="aggregate")

    p = sub.add_parser("join", help="tally changepoints against episodes")
    p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./capflows_out)")
    p.add_argument("--episodes", required=True, help="episodes.csv")
    p.add_argument("--changepoints", required=True, help="changepoints.json")

    p = sub.add_parser("run", help="full pipeline with a manifest for exact reruns")
    p.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./capflows_out)")
    p.add_argument("--manifest", help="rerun the configuration and inputs recorded in a manifest")
    p.add_argument("--flows")
    p.add_argument("--column")
    p.add_argument("--index")
    _add_episode_flags(p)
    _add_cp_flags(p)
    p.add_argument("--garch", choices=GARCH_MODES, default="none")
    p.add_argument("--formats", default=",".join(FORMATS),
                   help=f"comma-separated extra reports from {FORMATS} (empty for none)")

    p = sub.add_parser("reproduce", help="re-derive the published tables from bundled fixtures")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    return ap


def _run_config(args, out_dir) -> RunConfig:
    """RunConfig from parsed flags; subcommands without a flag get its default."""
    def opt(name, default):
        return getattr(args, name, default)

    penalty = opt("penalty", None)
    return RunConfig(
        approach=opt("approach", "both"),
        pelt=PeltConfig(CostKind(opt("cost", "variance")), penalty or 0.0, opt("min_seg", None)),
        auto_penalty=penalty is None,
        threshold=ThresholdConfig(opt("percentile", 0.30)),
        kmeans=KMeansConfig(restarts=opt("restarts", 10), rng_seed=opt("seed", 0)),
        trend=TrendConfig(opt("window", 25), opt("horizon", None)),
        use_returns=opt("returns", False),
        garch=opt("garch", "none"),
        out_dir=str(out_dir),
        formats=tuple(f for f in opt("formats", ",".join(FORMATS)).split(",") if f),
    )


def cmd_episodes(args) -> int:
    flows = load_flows(args.flows, args.column)
    cfg = _run_config(args, _out(args))
    out = Path(cfg.out_dir)
    rows, labels = [], []
    for country in sorted(flows):
        s = flows[country]
        for a in cfg.approaches:
            labs, _ = label_flows(s, a, cfg)
            rows += episode_rows(country, a, extract_episodes(labs, s.quarters[0]))
            labels += [{"country": country, "approach": a, "quarter": str(q), "label": lab.value}
                       for q, lab in zip(s.quarters, labs)]
    write_episodes(out / "episodes.csv", rows)
    write_csv(out / "labels.csv", ["country", "approach", "quarter", "label"], labels)
    print(f"{len(rows)} episodes -> {out / 'episodes.csv'}")
    return 0


def cmd_changepoints(args) -> int:
    index = load_index(args.index)
    cfg = _run_config(args, _out(args))
    out = Path(cfg.out_dir)
    doc = {"window": cfg.trend.window, "lookahead": cfg.trend.lookahead, "countries": {}}
    for country in sorted(index):
        seg, positions = segment(index[country], cfg)
        signed = classify_signs(index[country], positions, cfg.trend)
        doc["countries"][country] = {
            "series": "log_returns" if cfg.use_returns else "levels",
            "segmentation": seg.to_json(),
            "changepoints": [{"position": s.position, "date": s.date.isoformat(), "sign": s.sign.value}
                             for s in signed],
        }
    write_json(out / "changepoints.json", doc)
    n = sum(len(c["changepoints"]) for c in doc["countries"].values())
    print(f"{n} changepoints -> {out / 'changepoints.json'}")
    return 0


def cmd_garch(args) -> int:
    flows = load_flows(args.flows, args.column)
    params = write_garch(_out(args), fit_series(garch_series(flows, args.mode)))
    print(json.dumps(params, indent=2))
    return 0


def cmd_join(args) -> int:
    episodes = read_episodes(args.episodes)
    doc = read_json(args.changepoints)
    try:
        countries = doc["countries"]
    except (KeyError, TypeError):
        raise InputError(f"{args.changepoints}: expected a 'countries' object") from None
    approaches = sorted({a for _, a in episodes}, key=lambda a: ("threshold", "clustering").index(a)
                        if a in ("threshold", "clustering") else 2)
    out = _out(args)
    rows, text = [], []
    for a in approaches:
        tallies = []
        for country in sorted(countries):
            cps = countries[country]["changepoints"]
            dates = [parse_date(c["date"]) for c in cps]
            signs = [Sign(c["sign"]) for c in cps]
            tallies.append(tally(assign(episodes.get((country, a), []), dates), signs, country, a))
        rows += tally_rows(tallies, a)
        text.append(f"[{a}]\n{format_table(tallies)}")
    write_csv(out / "tally.csv", ["approach", "country", *CELLS, "total"], rows)
    print("\n".join(text), end="")
    return 0


def cmd_run(args) -> int:
    out = _out(args)
    if args.manifest:
        man = read_json(args.manifest)
        try:
            cfg = RunConfig.from_dict(man["config"], out_dir=str(out))
            inputs = {k: v["path"] for k, v in man["inputs"].items()}
            column = man.get("column")
        except (KeyError, TypeError, AttributeError):
            raise ConfigError(f"{args.manifest}: not a run manifest") from None
        for k, v in man["inputs"].items():
            got = sha256_of(v["path"]) if Path(v["path"]).exists() else None
            if got != v["sha256"]:
                raise InputError(f"input {k} ({v['path']}) does not match the manifest checksum")
    else:
        if not args.flows or not args.index:
            raise UsageError("run needs --flows and --index, or --manifest")
        cfg = _run_config(args, out)
        inputs = {"flows": args.flows, "index": args.index}
        column = args.column
    datasets, failures = build_datasets(load_flows(inputs["flows"], column), load_index(inputs["index"]))
    run = run_pipeline(datasets, cfg, inputs=inputs, failures=failures, column=column)
    for a in cfg.approaches:
        print(f"[{a}]")
        print(format_table(run.tallies(a)), end="")
    for name, err in run.failures.items():
        print(f"failed: {name}: {err['message']}", file=sys.stderr)
    return 0


def cmd_reproduce(args) -> int:
    rep = reproduce_fixtures()
    if args.json:
        print(json.dumps(rep.to_json(), indent=2, default=str))
    else:
        print(rep.render(), end="")
    return 0 if rep.ok else 1


COMMANDS = {"episodes": cmd_episodes, "changepoints": cmd_changepoints, "garch": cmd_garch,
            "join": cmd_join, "run": cmd_run, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except CapflowsError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io", "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
