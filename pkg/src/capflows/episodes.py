"""Percentile labelling of quarterly flows and run-length episode extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .core import Quarter, QuarterlySeries, finite_or_raise, quarter_span
from .errors import ConfigError, InputError, ParseError


class FlowLabel(str, Enum):
    SURGE = "surge"
    NORMAL = "normal"
    OUTFLOW = "outflow"

    @property
    def code(self) -> str:
        return self.value[0].upper()

    @classmethod
    def from_code(cls, c: str) -> "FlowLabel":
        try:
            return _BY_CODE[c]
        except KeyError:
            raise ParseError(f"unknown label code {c!r} (expected S, N or O)") from None


_BY_CODE = {lab.code: lab for lab in FlowLabel}


@dataclass(frozen=True, order=True)
class Episode:
    start: Quarter
    end: Quarter
    kind: FlowLabel

    def __post_init__(self):
        kind = FlowLabel(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is FlowLabel.NORMAL:
            raise InputError("normal quarters never form an episode")
        if quarter_span(self.start, self.end) < 2:
            raise InputError(f"episode {self.start}..{self.end} is shorter than 2 quarters")

    @property
    def length(self) -> int:
        return quarter_span(self.start, self.end)

    def __contains__(self, q: Quarter) -> bool:
        return self.start <= q <= self.end


@dataclass(frozen=True)
class ThresholdConfig:
    p: float = 0.30

    def __post_init__(self):
        if not 0.0 < self.p < 0.5:
            raise ConfigError(f"percentile must lie in (0, 0.5), got {self.p}")


def percentile(values: Iterable[float], p: float) -> float:
    """Linear-interpolation quantile at fraction ``p`` (h = (n-1)p on sorted data)."""
    v = np.sort(finite_or_raise(list(values)))
    if v.size == 0:
        raise InputError("percentile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p must lie in [0, 1], got {p}")
    h = (v.size - 1) * p
    lo = math.floor(h)
    hi = math.ceil(h)
    return float(v[lo] + (h - lo) * (v[hi] - v[lo]))


def label_by_threshold(series: QuarterlySeries | Sequence[float],
                       cfg: ThresholdConfig = ThresholdConfig()) -> list[FlowLabel]:
    """Surge above the (1-p) quantile, Outflow below the p quantile, strictly."""
    x = series.values if isinstance(series, QuarterlySeries) else finite_or_raise(series)
    if len(x) < 4:
        raise InputError(f"threshold labelling needs at least 4 quarters, got {len(x)}")
    hi = percentile(x, 1.0 - cfg.p)
    lo = percentile(x, cfg.p)
    out = []
    for v in x:
        if v > hi:
            out.append(FlowLabel.SURGE)
        elif v < lo:
            out.append(FlowLabel.OUTFLOW)
        else:
            out.append(FlowLabel.NORMAL)
    return out


def extract_episodes(labels: Sequence[FlowLabel], start: Quarter, min_run: int = 2) -> list[Episode]:
    """Maximal Surge/Outflow runs of at least ``min_run`` quarters.

    ``labels[i]`` belongs to quarter ``start + i``.
    """
    if min_run < 2:
        raise ConfigError("min_run must be at least 2")
    labels = [FlowLabel(lab) for lab in labels]
    episodes = []
    i = 0
    while i < len(labels):
        j = i
        while j + 1 < len(labels) and labels[j + 1] is labels[i]:
            j += 1
        if labels[i] is not FlowLabel.NORMAL and j - i + 1 >= min_run:
            episodes.append(Episode(start + i, start + j, labels[i]))
        i = j + 1
    return episodes


def labels_from_episodes(episodes: Iterable[Episode], start: Quarter, n: int) -> list[FlowLabel]:
    """Per-quarter labels with every quarter outside an episode set to Normal."""
    labels = [FlowLabel.NORMAL] * n
    for ep in episodes:
        for q in range(ep.start.ordinal, ep.end.ordinal + 1):
            i = q - start.ordinal
            if not 0 <= i < n:
                raise InputError(f"episode {ep.start}..{ep.end} outside the labelled range")
            labels[i] = ep.kind
    return labels


def labels_to_codes(labels: Iterable[FlowLabel]) -> str:
    return "".join(FlowLabel(lab).code for lab in labels)


def codes_to_labels(codes: str) -> list[FlowLabel]:
    return [FlowLabel.from_code(c) for c in codes]
