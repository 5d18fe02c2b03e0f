"""Bundled transcriptions of the published episode and changepoint tables.

``appendix_b.csv`` and ``appendix_c.csv`` hold the printed cells verbatim;
``errata.json`` lists every repair and every unresolved inconsistency.  The
curated views returned here apply the repairs, and :func:`reproduce_fixtures`
re-derives the published counts, checking that each mismatch it meets is
one the errata file declares and that no declared erratum has gone stale.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from functools import lru_cache
from importlib import resources

from .core import Quarter, date_to_quarter, parse_us_date, quarter_span
from .episodes import Episode, FlowLabel, codes_to_labels, extract_episodes, labels_from_episodes
from .errors import FixtureIntegrityError
from .join import check_disjoint, regime_of

APPROACHES = ("threshold", "clustering")
REGIMES = ("surge", "normal", "outflow")
FIRST_QUARTER = Quarter(2000, 1)
LAST_QUARTER = Quarter(2017, 1)
N_QUARTERS = quarter_span(FIRST_QUARTER, LAST_QUARTER)
# the B tables print "Korea, Rep" without the period used everywhere else
_ALIASES = {"Korea, Rep": "Korea, Rep."}


def _text(name: str) -> str:
    return resources.files("capflows").joinpath("data", name).read_text(encoding="utf-8")


def _norm(label: str) -> str:
    return _ALIASES.get(label, label)


@dataclass(frozen=True)
class EpisodeRow:
    approach: str
    row: int
    printed_country: str
    country: str
    kind: FlowLabel
    start: Quarter
    end: Quarter
    quarters: int


@dataclass(frozen=True)
class DateRow:
    approach: str
    printed_country: str
    country: str
    regime: FlowLabel
    printed_date: str


@dataclass
class Fixtures:
    episode_rows: list[EpisodeRow]
    date_rows: list[DateRow]
    tables: dict
    errata: list[dict]

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.errata if e["kind"] == kind]

    @property
    def countries(self) -> list[str]:
        return list(self.tables["countries"])

    def curated_rows(self) -> list[EpisodeRow]:
        """Episode rows with corrected bounds."""
        fixes = {(e["approach"], e["row"], e["cell"]): e for e in self.of_kind("episode_bound")}
        out = []
        for r in self.episode_rows:
            e = fixes.get((r.approach, r.row, r.kind.value))
            if e is not None:
                val = Quarter.parse(e["corrected"])
                r = EpisodeRow(r.approach, r.row, r.printed_country, r.country, r.kind,
                               val if e["field"] == "start" else r.start,
                               val if e["field"] == "end" else r.end, r.quarters)
            out.append(r)
        return out

    def episodes(self, approach: str) -> dict[str, list[Episode]]:
        """Curated episodes per country, validated as disjoint."""
        out = {c: [] for c in self.countries}
        for r in self.curated_rows():
            if r.approach == approach:
                try:
                    out[r.country].append(Episode(r.start, r.end, r.kind))
                except ValueError as exc:
                    raise FixtureIntegrityError(f"{approach} row {r.row} {r.kind.value}: {exc}") from exc
        return {c: check_disjoint(eps) for c, eps in out.items()}

    def changepoint_dates(self, approach: str) -> dict[str, list[tuple[date, FlowLabel]]]:
        """Curated (date, published regime) pairs per country."""
        fixes = {(e["approach"], e["country"], e["regime"], e["printed"]): e["corrected"]
                 for e in self.of_kind("date_typo")}
        out = {c: [] for c in self.countries}
        for r in self.date_rows:
            if r.approach == approach:
                text = fixes.get((r.approach, r.country, r.regime.value, r.printed_date), r.printed_date)
                out[r.country].append((parse_us_date(text), r.regime))
        return out


def _load_episode_rows() -> list[EpisodeRow]:
    rows = []
    for i, rec in enumerate(csv.DictReader(io.StringIO(_text("appendix_b.csv"))), start=2):
        try:
            rows.append(EpisodeRow(rec["approach"], int(rec["row"]), _norm(rec["printed_country"]),
                                   rec["country"], FlowLabel(rec["kind"]), Quarter.parse(rec["start"]),
                                   Quarter.parse(rec["end"]), int(rec["quarters"])))
        except (KeyError, ValueError) as exc:
            raise FixtureIntegrityError(f"appendix_b.csv:{i}: {exc}") from exc
    return rows


def _load_date_rows() -> list[DateRow]:
    rows = []
    for i, rec in enumerate(csv.DictReader(io.StringIO(_text("appendix_c.csv"))), start=2):
        try:
            rows.append(DateRow(rec["approach"], _norm(rec["printed_country"]), rec["country"],
                                FlowLabel(rec["regime"]), rec["date"]))
        except (KeyError, ValueError) as exc:
            raise FixtureIntegrityError(f"appendix_c.csv:{i}: {exc}") from exc
    return rows


@lru_cache(maxsize=1)
def load_fixtures() -> Fixtures:
    fx = Fixtures(_load_episode_rows(), _load_date_rows(),
                  json.loads(_text("tables.json")), json.loads(_text("errata.json"))["errata"])
    known = set(fx.countries)
    for r in fx.episode_rows:
        if r.country not in known or (r.printed_country and r.printed_country not in known):
            raise FixtureIntegrityError(f"unknown country in appendix_b.csv row {r.row}")
    for r in fx.date_rows:
        if r.country not in known or r.printed_country not in known:
            raise FixtureIntegrityError(f"unknown country {r.country!r} in appendix_c.csv")
    return fx


def load_label_fixtures() -> dict[tuple[str, str], tuple[Quarter, list[FlowLabel]]]:
    """``(approach, country) -> (first quarter, per-quarter labels)``."""
    out = {}
    for rec in csv.DictReader(io.StringIO(_text("labels.csv"))):
        out[(rec["approach"], rec["country"])] = (Quarter.parse(rec["first_quarter"]),
                                                  codes_to_labels(rec["labels"]))
    return out


def build_label_rows(fx: Fixtures) -> list[dict]:
    rows = []
    for approach in APPROACHES:
        for country, eps in fx.episodes(approach).items():
            labels = labels_from_episodes(eps, FIRST_QUARTER, N_QUARTERS)
            rows.append({"approach": approach, "country": country,
                         "first_quarter": str(FIRST_QUARTER),
                         "labels": "".join(lab.code for lab in labels)})
    return rows


# -- reproduction report ---------------------------------------------------

@dataclass
class Check:
    group: str
    name: str
    expected: object
    got: object
    status: str  # "pass", "erratum" or "fail"
    errata: tuple[str, ...] = ()
    detail: str = ""


@dataclass
class Report:
    checks: list[Check] = field(default_factory=list)

    def add(self, *args, **kw) -> Check:
        c = Check(*args, **kw)
        self.checks.append(c)
        return c

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def group(self, name: str) -> list[Check]:
        return [c for c in self.checks if c.group == name]

    def render(self) -> str:
        lines = []
        for c in self.checks:
            tag = {"pass": "PASS", "erratum": "PASS*", "fail": "FAIL"}[c.status]
            note = f"  [{', '.join(c.errata)}]" if c.errata else ""
            extra = f"  {c.detail}" if c.detail else ""
            lines.append(f"{tag:6s}{c.group:10s}{c.name:40s}expected={c.expected} got={c.got}{note}{extra}")
        counts = Counter(c.status for c in self.checks)
        lines.append(f"{counts['pass']} exact, {counts['erratum']} explained by errata, {counts['fail']} failed")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"ok": self.ok, "checks": [c.__dict__ | {"errata": list(c.errata)} for c in self.checks]}


def _status(expected, got, adjusted, ids):
    if got == expected:
        return "pass", ()
    if got == adjusted and ids:
        return "erratum", tuple(ids)
    return "fail", tuple(ids)


def _check_errata(fx: Fixtures, rep: Report):
    """Each erratum must match the raw transcription, and every detectable defect must be declared."""
    # misaligned cells: country differs from the label printed above it
    declared = {}
    for e in fx.of_kind("misaligned_rows"):
        for row, cell in e["cells"]:
            declared[(e["approach"], row, cell)] = (e["printed_label"], e["country"], e["id"])
    found = {}
    current = {}
    for r in fx.episode_rows:
        if r.printed_country:
            current[r.approach] = r.printed_country
        if current[r.approach] != r.country:
            found[(r.approach, r.row, r.kind.value)] = (current[r.approach], r.country)
    bad = sorted(set(found) ^ set(declared))
    bad += [k for k in found if k in declared and found[k] != declared[k][:2]]
    rep.add("errata", "misaligned cells", len(declared), len(found), "fail" if bad else "pass",
            detail=f"undeclared or stale: {bad}" if bad else "")

    # bound repairs must start from the printed value
    raw = {(r.approach, r.row, r.kind.value): r for r in fx.episode_rows}
    bad = []
    for e in fx.of_kind("episode_bound"):
        r = raw.get((e["approach"], e["row"], e["cell"]))
        if r is None or str(getattr(r, e["field"])) != e["printed"]:
            bad.append(e["id"])
    rep.add("errata", "episode bound repairs", 0, len(bad), "fail" if bad else "pass",
            detail=f"stale: {bad}" if bad else "")

    # Quarters column against the span of the curated bounds
    declared = {(e["approach"], e["row"], e["cell"]): (e["printed"], e["corrected"])
                for e in fx.of_kind("quarters_column")}
    found = {(r.approach, r.row, r.kind.value): (r.quarters, quarter_span(r.start, r.end))
             for r in fx.curated_rows() if r.quarters != quarter_span(r.start, r.end)}
    bad = sorted(k for k in set(found) | set(declared) if found.get(k) != declared.get(k))
    rep.add("errata", "Quarters column", len(declared), len(found), "fail" if bad else "pass",
            detail=f"undeclared or stale: {bad}" if bad else "")

    # date typos and merged C rows
    raw_dates = {(r.approach, r.country, r.regime.value, r.printed_date) for r in fx.date_rows}
    bad = [e["id"] for e in fx.of_kind("date_typo")
           if (e["approach"], e["country"], e["regime"], e["printed"]) not in raw_dates]
    declared = set()
    for e in fx.of_kind("c_row_merge"):
        for regime, ds in e["dates"].items():
            declared |= {(e["approach"], e["printed_label"], e["country"], regime, d) for d in ds}
    found = {(r.approach, r.printed_country, r.country, r.regime.value, r.printed_date)
             for r in fx.date_rows if r.printed_country != r.country}
    if found != declared:
        bad.append("c_row_merge")
    rep.add("errata", "changepoint date repairs", 0, len(bad), "fail" if bad else "pass",
            detail=f"stale: {bad}" if bad else "")


def _check_table1(fx: Fixtures, rep: Report, labels):
    t1 = fx.tables["table1"]
    conflicts = {(e["approach"], e["country"], e["cell"]): e for e in fx.of_kind("count_conflict")}
    totals = {(e["approach"], e["cell"]): e for e in fx.of_kind("total_conflict") if e["table"] == "1"}
    grand = Counter()
    for ai, approach in enumerate(APPROACHES):
        curated = fx.episodes(approach)
        for country in fx.countries:
            start, labs = labels[(approach, country)]
            eps = extract_episodes(labs, start)
            got = (sum(e.kind is FlowLabel.SURGE for e in eps), sum(e.kind is FlowLabel.OUTFLOW for e in eps))
            grand[approach, "surge"] += got[0]
            grand[approach, "outflow"] += got[1]
            expected = tuple(t1["rows"][country][2 * ai: 2 * ai + 2])
            adjusted, ids = list(expected), []
            for j, cell in enumerate(("surge", "outflow")):
                e = conflicts.get((approach, country, cell))
                if e is not None:
                    adjusted[j] = e["fixture"]
                    ids.append(e["id"])
            status, ids = _status(expected, got, tuple(adjusted), ids)
            if eps != curated[country]:
                status = "fail"
            rep.add("table1", f"{approach} {country}", expected, got, status, ids)
        for j, cell in enumerate(("surge", "outflow")):
            expected = t1["total"][2 * ai + j]
            e = totals.get((approach, cell))
            status, ids = _status(expected, grand[approach, cell],
                                  e["fixture"] if e else expected, [e["id"]] if e else [])
            rep.add("table1", f"{approach} total {cell} episodes", expected, grand[approach, cell], status, ids)


def _check_spans(fx: Fixtures, rep: Report):
    text = fx.tables["text_totals"]
    conflicts = {(e["approach"], e["cell"]): e for e in fx.of_kind("total_conflict") if e["table"] == "text"}
    qfix = fx.of_kind("quarters_column")
    curated = fx.curated_rows()
    for approach in APPROACHES:
        for kind in ("surge", "outflow"):
            printed = sum(r.quarters for r in fx.episode_rows if r.approach == approach and r.kind.value == kind)
            expected = text[approach][f"{kind}_quarters"]
            e = conflicts.get((approach, f"{kind}_quarters"))
            status, ids = _status(expected, printed, e["fixture"] if e else expected, [e["id"]] if e else [])
            rep.add("spans", f"{approach} printed {kind} quarters", expected, printed, status, ids)
            # spans of the curated dates differ from the printed column by the declared corrections
            span = sum(quarter_span(r.start, r.end) for r in curated
                       if r.approach == approach and r.kind.value == kind)
            fixes = [q for q in qfix if q["approach"] == approach and q["cell"] == kind]
            implied = printed + sum(q["corrected"] - q["printed"] for q in fixes)
            rep.add("spans", f"{approach} curated {kind} quarters", implied, span,
                    "pass" if span == implied else "fail", tuple(q["id"] for q in fixes))


def _check_tables23(fx: Fixtures, rep: Report):
    conflicts = defaultdict(list)
    for e in fx.of_kind("placement_conflict"):
        conflicts[e["approach"], e["country"]].append(e)
    row_conf = {(e["approach"], e["country"]): e for e in fx.of_kind("table_row_conflict")}
    for approach, tname in zip(APPROACHES, ("table2", "table3")):
        table = fx.tables[tname]
        episodes = fx.episodes(approach)
        dates = fx.changepoint_dates(approach)
        grand = 0
        for country in fx.countries:
            decl = {(parse_us_date(e["date"]), e["published"], e["computed"]): e["id"]
                    for e in conflicts[approach, country]}
            found = set()
            computed = Counter()
            for d, published in dates[country]:
                reg = regime_of(date_to_quarter(d), episodes[country])
                computed[reg.value] += 1
                if reg is not published:
                    found.add((d, published.value, reg.value))
            grand += len(dates[country])
            place_ids = tuple(decl[k] for k in sorted(found & set(decl)))
            place_ok = found == set(decl)
            rep.add("placement", f"{approach} {country}", 0, len(found),
                    "fail" if not place_ok else ("erratum" if found else "pass"), place_ids,
                    detail="" if place_ok else f"undeclared or stale: {sorted(found ^ set(decl))}")

            cells = table["rows"][country]
            expected = (cells[0] + cells[1], cells[2] + cells[3], cells[4] + cells[5])
            got = tuple(computed[r] for r in REGIMES)
            # what the declared errata predict: the table row (or its declared
            # replacement) with every declared placement conflict moved
            base, ids = list(expected), []
            e = row_conf.get((approach, country))
            if e is not None:
                base, ids = list(e["fixture"]), [e["id"]]
            for (_, pub, comp), eid in decl.items():
                base[REGIMES.index(pub)] -= 1
                base[REGIMES.index(comp)] += 1
                ids.append(eid)
            status, ids = _status(expected, got, tuple(base), ids)
            if not place_ok:
                status = "fail"
            if sum(got) != cells[6]:
                status = "fail"
            rep.add(tname, f"{approach} {country}", expected, got, status, ids)
        rep.add(tname, f"{approach} grand total", table["total"][6], grand,
                "pass" if grand == table["total"][6] == fx.tables["text_totals"]["changepoints"] else "fail")


def reproduce_fixtures() -> Report:
    """Re-derive Tables 1-3 and the episode spans from the bundled fixtures."""
    fx = load_fixtures()
    rep = Report()
    _check_errata(fx, rep)
    labels = load_label_fixtures()
    expected_rows = build_label_rows(fx)
    stale = [r for r in expected_rows
             if "".join(lab.code for lab in labels[(r["approach"], r["country"])][1]) != r["labels"]]
    rep.add("errata", "labels.csv matches curated episodes", 0, len(stale), "fail" if stale else "pass")
    _check_table1(fx, rep, labels)
    _check_spans(fx, rep)
    _check_tables23(fx, rep)
    return rep
