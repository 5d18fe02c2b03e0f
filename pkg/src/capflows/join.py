"""Place signed changepoints in flow regimes and cross-tabulate them."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence

from .core import Quarter, date_to_quarter
from .episodes import Episode, FlowLabel
from .errors import FixtureIntegrityError, InputError
from .trend import Sign, SignedChangepoint

CELLS = ("surge_pos", "surge_neg", "normal_pos", "normal_neg", "outflow_pos", "outflow_neg")


def check_disjoint(episodes: Iterable[Episode]) -> list[Episode]:
    """Sorted episodes; overlapping episodes of different kinds are an error."""
    eps = sorted(episodes)
    for i, a in enumerate(eps):
        for b in eps[i + 1:]:
            if b.start > a.end:
                break
            if b.kind is not a.kind:
                raise FixtureIntegrityError(
                    f"{a.kind.value} episode {a.start}..{a.end} overlaps "
                    f"{b.kind.value} episode {b.start}..{b.end}"
                )
    return eps


def regime_of(q: Quarter, episodes: Sequence[Episode]) -> FlowLabel:
    for ep in episodes:
        if q in ep:
            return ep.kind
    return FlowLabel.NORMAL


def _date_of(cp) -> date:
    d = cp.date if isinstance(cp, SignedChangepoint) else cp
    if not isinstance(d, date):
        raise InputError(f"changepoint {cp!r} carries no calendar date")
    return d


def assign(episodes: Iterable[Episode], cps: Iterable[SignedChangepoint | date]) -> list[FlowLabel]:
    """Regime of each changepoint by the quarter its date falls in."""
    eps = check_disjoint(episodes)
    return [regime_of(date_to_quarter(_date_of(cp)), eps) for cp in cps]


@dataclass(frozen=True)
class EpisodeTally:
    country: str
    approach: str
    surge_pos: int = 0
    surge_neg: int = 0
    normal_pos: int = 0
    normal_neg: int = 0
    outflow_pos: int = 0
    outflow_neg: int = 0

    @property
    def cells(self) -> tuple[int, ...]:
        return tuple(getattr(self, c) for c in CELLS)

    @property
    def total(self) -> int:
        return sum(self.cells)

    def regime_sums(self) -> tuple[int, int, int]:
        c = self.cells
        return (c[0] + c[1], c[2] + c[3], c[4] + c[5])

    def __add__(self, other: "EpisodeTally") -> "EpisodeTally":
        return EpisodeTally(self.country, self.approach,
                            *(a + b for a, b in zip(self.cells, other.cells)))


def tally(regimes: Sequence[FlowLabel], signs: Sequence[Sign],
          country: str = "", approach: str = "") -> EpisodeTally:
    if len(regimes) != len(signs):
        raise InputError("every changepoint needs both a regime and a sign")
    counts = dict.fromkeys(CELLS, 0)
    for reg, sign in zip(regimes, signs):
        suffix = "pos" if Sign(sign) is Sign.POSITIVE else "neg"
        counts[f"{FlowLabel(reg).value}_{suffix}"] += 1
    return EpisodeTally(country, approach, **counts)


def total_row(tallies: Iterable[EpisodeTally], approach: str = "") -> EpisodeTally:
    out = EpisodeTally("Total", approach)
    for t in tallies:
        out = out + t
    return out


def format_table(tallies: Sequence[EpisodeTally]) -> str:
    """Aligned plain-text table with a total row; zero cells print as '-'."""
    head = ["Country", "S+", "S-", "N+", "N-", "O+", "O-", "Total"]
    rows = [head]
    for t in [*tallies, total_row(tallies)]:
        rows.append([t.country, *(str(v) if v else "-" for v in t.cells), str(t.total)])
    width = [max(len(r[i]) for r in rows) for i in range(len(head))]
    lines = []
    for r in rows:
        lines.append("  ".join([r[0].ljust(width[0])] + [v.rjust(w) for v, w in zip(r[1:], width[1:])]))
    return "\n".join(lines) + "\n"
