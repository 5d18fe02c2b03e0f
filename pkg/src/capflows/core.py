"""Calendar and series primitives.

Daily dates are plain :class:`datetime.date` objects. Quarters are integer
pairs so that nothing at quarter resolution ever depends on a day or a
timezone.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, OrderingError, ParseError

_QUARTER_RE = re.compile(r"^\s*(\d{4})\s*Q([1-4])\s*$")


@dataclass(frozen=True, order=True)
class Quarter:
    year: int
    q: int

    def __post_init__(self):
        if not 1 <= self.q <= 4:
            raise InputError(f"quarter number must be 1..4, got {self.q}")

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        """Parse ``"2006Q1"``-style notation."""
        m = _QUARTER_RE.match(text)
        if m is None:
            raise ParseError(f"malformed quarter {text!r} (expected YYYYQn)")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_ordinal(cls, n: int) -> "Quarter":
        return cls(n // 4, n % 4 + 1)

    @property
    def ordinal(self) -> int:
        """Quarters elapsed since year 0; consecutive quarters differ by one."""
        return self.year * 4 + self.q - 1

    def succ(self) -> "Quarter":
        return Quarter.from_ordinal(self.ordinal + 1)

    def pred(self) -> "Quarter":
        return Quarter.from_ordinal(self.ordinal - 1)

    def __add__(self, n: int) -> "Quarter":
        return Quarter.from_ordinal(self.ordinal + int(n))

    def __str__(self) -> str:
        return f"{self.year}Q{self.q}"


def date_to_quarter(d: date) -> Quarter:
    return Quarter(d.year, (d.month + 2) // 3)


def quarter_span(a: Quarter, b: Quarter) -> int:
    """Inclusive number of quarters from ``a`` to ``b``."""
    if a > b:
        raise OrderingError(f"quarter_span requires a <= b, got {a} > {b}")
    return 4 * (b.year - a.year) + (b.q - a.q) + 1


def quarter_range(a: Quarter, b: Quarter) -> list[Quarter]:
    return [a + i for i in range(quarter_span(a, b))]


def parse_date(text: str) -> date:
    """ISO-8601 ``YYYY-MM-DD``."""
    try:
        return date.fromisoformat(text.strip())
    except ValueError as exc:
        raise ParseError(f"malformed date {text!r} (expected YYYY-MM-DD)") from exc


def parse_us_date(text: str) -> date:
    """``M/D/YYYY`` as printed in the published changepoint tables."""
    try:
        m, d, y = (int(p) for p in text.strip().split("/"))
        return date(y, m, d)
    except ValueError as exc:
        raise ParseError(f"malformed date {text!r} (expected M/D/YYYY)") from exc


def _frozen_array(values: Iterable[float]) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


class DailySeries:
    """Daily index levels keyed by strictly increasing calendar dates.

    Gaps (weekends, holidays) are allowed; levels must be finite and positive.
    """

    __slots__ = ("dates", "values")

    def __init__(self, dates: Sequence[date], values: Sequence[float]):
        dates = tuple(dates)
        values = _frozen_array(values)
        if len(dates) != len(values):
            raise InputError("dates and values differ in length")
        if len(dates) < 2:
            raise InputError("a daily series needs at least 2 points")
        for i in range(1, len(dates)):
            if not dates[i - 1] < dates[i]:
                raise OrderingError(
                    f"dates not strictly increasing: {dates[i - 1]} then {dates[i]}"
                )
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise InputError("daily values must be finite and positive")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("DailySeries is immutable")

    def __len__(self) -> int:
        return len(self.dates)

    def __repr__(self) -> str:
        return f"DailySeries(n={len(self)}, {self.dates[0]}..{self.dates[-1]})"

    def log_returns(self) -> np.ndarray:
        return np.diff(np.log(self.values))


class QuarterlySeries:
    """Quarterly values on a contiguous run of quarters."""

    __slots__ = ("quarters", "values")

    def __init__(self, quarters: Sequence[Quarter], values: Sequence[float]):
        quarters = tuple(quarters)
        values = _frozen_array(values)
        if len(quarters) != len(values):
            raise InputError("quarters and values differ in length")
        if not quarters:
            raise InputError("a quarterly series needs at least one point")
        for i in range(1, len(quarters)):
            if quarters[i] != quarters[i - 1].succ():
                raise OrderingError(
                    f"quarters not contiguous: {quarters[i - 1]} then {quarters[i]}"
                )
        if not np.all(np.isfinite(values)):
            raise InputError("quarterly values must be finite")
        object.__setattr__(self, "quarters", quarters)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("QuarterlySeries is immutable")

    @classmethod
    def from_start(cls, start: Quarter, values: Sequence[float]) -> "QuarterlySeries":
        return cls([start + i for i in range(len(values))], values)

    def __len__(self) -> int:
        return len(self.quarters)

    def __repr__(self) -> str:
        return f"QuarterlySeries(n={len(self)}, {self.quarters[0]}..{self.quarters[-1]})"


def finite_or_raise(values, what="values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{what} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise InputError(f"{what} contain a non-finite entry at index {bad}")
    return arr

