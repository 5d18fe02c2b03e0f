"""CSV/JSON readers and writers.

Flow files: ``country,quarter,<value column>`` with quarters as ``YYYYQn``.
The value column is ``net_flow_pct_gdp`` (net inflows, liabilities minus
assets, taken as supplied) or ``assets_minus_liabilities_pct_gdp``, which is
negated on load so that surges are always large positive values.

Index files: ``country,date,close`` with ISO dates, in date order per country.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping

from .core import DailySeries, Quarter, QuarterlySeries, parse_date, quarter_span
from .episodes import Episode, FlowLabel
from .errors import CapflowsError, InputError, ParseError

FLOW_COLUMNS = {
    "net_flow_pct_gdp": 1.0,
    "assets_minus_liabilities_pct_gdp": -1.0,
}
EPISODE_FIELDS = ["country", "approach", "kind", "start", "end", "quarters"]


def sha256_of(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _rows(path, required):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", path=path, line=1)
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(f"missing column(s) {missing}; header is {header}", path=path, line=1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", path=path, line=lineno)
            yield lineno, dict(zip(header, (f.strip() for f in rec))), header


def _number(text, path, line, what):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not a number", path=path, line=line) from None
    if v != v or v in (float("inf"), float("-inf")):
        raise ParseError(f"{what} is not finite", path=path, line=line)
    return v


def load_flows(path: str | Path, column: str | None = None) -> dict[str, QuarterlySeries]:
    """Per-country quarterly net flows; rows may come in any order."""
    path = Path(path)
    pts = defaultdict(dict)
    sign = None
    for line, rec, header in _rows(path, ["country", "quarter"]):
        if sign is None:
            present = [c for c in FLOW_COLUMNS if c in header]
            if column is None:
                if len(present) != 1:
                    raise ParseError(f"need exactly one of {sorted(FLOW_COLUMNS)} (or an explicit "
                                     f"column choice), found {present}", path=path, line=1)
                column = present[0]
            if column not in FLOW_COLUMNS:
                raise InputError(f"unknown flow column {column!r}; choose from {sorted(FLOW_COLUMNS)}")
            if column not in header:
                raise ParseError(f"missing column {column!r}", path=path, line=1)
            sign = FLOW_COLUMNS[column]
        try:
            q = Quarter.parse(rec["quarter"])
        except ParseError as exc:
            raise ParseError(str(exc), path=path, line=line) from None
        country = rec["country"]
        if not country:
            raise ParseError("empty country", path=path, line=line)
        if q in pts[country]:
            raise ParseError(f"duplicate ({country}, {q}) on lines {pts[country][q][0]} and {line}",
                             path=path, line=line)
        pts[country][q] = (line, sign * _number(rec[column], path, line, "flow"))
    out = {}
    for country, byq in pts.items():
        qs = sorted(byq)
        for a, b in zip(qs, qs[1:]):
            if b != a.succ():
                raise ParseError(f"{country}: quarters {a} and {b} are not contiguous "
                                 f"(missing {a.succ()})", path=path, line=byq[b][0])
        out[country] = QuarterlySeries(qs, [byq[q][1] for q in qs])
    if not out:
        raise ParseError("no data rows", path=path)
    return out


def load_index(path: str | Path) -> dict[str, DailySeries]:
    """Per-country daily closes; each country's rows must be in strictly increasing date order."""
    path = Path(path)
    pts = defaultdict(list)
    for line, rec, _ in _rows(path, ["country", "date", "close"]):
        try:
            d = parse_date(rec["date"])
        except ParseError as exc:
            raise ParseError(str(exc), path=path, line=line) from None
        close = _number(rec["close"], path, line, "close")
        if close <= 0:
            raise ParseError(f"close must be positive, got {close}", path=path, line=line)
        series = pts[rec["country"]]
        if series and not series[-1][1] < d:
            raise ParseError(f"{rec['country']}: date {d} on line {line} does not follow "
                             f"{series[-1][1]} on line {series[-1][0]}", path=path, line=line)
        series.append((line, d, close))
    out = {}
    for country, series in pts.items():
        try:
            out[country] = DailySeries([p[1] for p in series], [p[2] for p in series])
        except CapflowsError as exc:
            raise ParseError(f"{country}: {exc}", path=path, line=series[0][0]) from None
    if not out:
        raise ParseError("no data rows", path=path)
    return out


def fmt(v: float) -> str:
    """Shortest round-tripping float text; stable across runs."""
    return repr(float(v))


def write_csv(path: str | Path, fieldnames: list[str], rows: Iterable[Mapping]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def write_json(path: str | Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path: str | Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None


def episode_rows(country: str, approach: str, episodes: Iterable[Episode]) -> list[dict]:
    return [{"country": country, "approach": approach, "kind": ep.kind.value,
             "start": str(ep.start), "end": str(ep.end), "quarters": ep.length}
            for ep in episodes]


def write_episodes(path: str | Path, rows: Iterable[dict]) -> None:
    write_csv(path, EPISODE_FIELDS, rows)


def read_episodes(path: str | Path) -> dict[tuple[str, str], list[Episode]]:
    """``(country, approach) -> episodes``; the quarters column must match the bounds."""
    out = defaultdict(list)
    for line, rec, _ in _rows(path, EPISODE_FIELDS):
        try:
            ep = Episode(Quarter.parse(rec["start"]), Quarter.parse(rec["end"]), FlowLabel(rec["kind"]))
        except (CapflowsError, ValueError) as exc:
            raise ParseError(str(exc), path=path, line=line) from None
        if str(ep.length) != rec["quarters"]:
            raise ParseError(f"quarters {rec['quarters']} disagrees with {ep.start}..{ep.end} "
                             f"({quarter_span(ep.start, ep.end)})", path=path, line=line)
        out[(rec["country"], rec["approach"])].append(ep)
    return dict(out)
