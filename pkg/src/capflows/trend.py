"""Trailing moving average and the post-changepoint sign rule."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .changepoint import Segmentation
from .core import DailySeries, finite_or_raise
from .errors import ConfigError, InputError


class Sign(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class SignedChangepoint:
    position: int
    date: date | None
    sign: Sign


@dataclass(frozen=True)
class TrendConfig:
    """``horizon`` defaults to ``window``: the sign compares MA one window ahead."""

    window: int = 25
    horizon: int | None = None

    def __post_init__(self):
        if self.window < 2:
            raise ConfigError(f"window must be >= 2, got {self.window}")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")

    @property
    def lookahead(self) -> int:
        return self.window if self.horizon is None else self.horizon


def _levels(series) -> tuple[np.ndarray, tuple | None]:
    if isinstance(series, DailySeries):
        return series.values, series.dates
    return finite_or_raise(series, "index levels"), None


def moving_average(series: DailySeries | Sequence[float], window: int = 25) -> np.ndarray:
    """Trailing simple MA; the first ``window - 1`` points use the expanding mean."""
    y, _ = _levels(series)
    if window < 1:
        raise ConfigError("window must be positive")
    if window > y.size:
        raise ConfigError(f"window {window} exceeds series length {y.size}")
    head = np.cumsum(y[: window - 1]) / np.arange(1, window)
    return np.concatenate((head, sliding_window_view(y, window).mean(axis=1)))


def classify_signs(series: DailySeries | Sequence[float],
                   changepoints: Segmentation | Sequence[int],
                   cfg: TrendConfig = TrendConfig()) -> list[SignedChangepoint]:
    """Positive iff MA at min(tau + horizon, n) is strictly above MA at tau."""
    y, dates = _levels(series)
    n = y.size
    taus = changepoints.changepoints if isinstance(changepoints, Segmentation) else changepoints
    ma = moving_average(y, cfg.window)
    out = []
    for tau in taus:
        tau = int(tau)
        if not 1 <= tau <= n - 1:
            raise InputError(f"changepoint {tau} outside 1..{n - 1}")
        h = min(tau + cfg.lookahead, n)
        sign = Sign.POSITIVE if ma[h - 1] > ma[tau - 1] else Sign.NEGATIVE
        out.append(SignedChangepoint(tau, dates[tau - 1] if dates else None, sign))
    return out
