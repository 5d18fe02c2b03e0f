"""GARCH(1,1) conditional variances with a constant mean.

    eps_t = x_t - mu
    sigma2_1 = var(eps)
    sigma2_t = omega + alpha * eps_{t-1}^2 + beta_g * sigma2_{t-1}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .core import finite_or_raise
from .errors import FitError, InputError, ParameterError

_LOG_2PI = math.log(2.0 * math.pi)
GRID = np.round(np.arange(0.05, 0.901, 0.05), 2)
MAX_PERSISTENCE = 0.98
MIN_FIT_N = 50


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta_g: float
    mu: float = 0.0

    def __post_init__(self):
        vals = (self.omega, self.alpha, self.beta_g, self.mu)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError(f"non-finite GARCH parameters {vals}")
        if self.omega <= 0:
            raise ParameterError(f"omega must be > 0, got {self.omega}")
        if self.alpha < 0 or self.beta_g < 0:
            raise ParameterError("alpha and beta_g must be >= 0")
        if self.alpha + self.beta_g >= 1:
            raise ParameterError(f"alpha + beta_g = {self.alpha + self.beta_g} is not < 1")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta_g

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.persistence)


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    loglik: float
    n: int
    diagnostics: dict = field(default_factory=dict, compare=False)


def _residuals(values, mu):
    x = finite_or_raise(values)
    if x.size < 2:
        raise InputError("GARCH filtering needs at least 2 observations")
    return x - mu


def _filter_eps(eps: np.ndarray, omega: float, alpha: float, beta_g: float) -> np.ndarray:
    # sigma2_t - beta_g sigma2_{t-1} = omega + alpha eps_{t-1}^2 is a first-order
    # IIR filter; the initial condition carries sigma2_1
    drive = omega + alpha * eps[:-1] ** 2
    s1 = float(np.var(eps))
    rest, _ = lfilter([1.0], [1.0, -beta_g], drive, zi=[beta_g * s1])
    return np.concatenate(([s1], rest))


def garch_filter(values: Sequence[float], params: GarchParams) -> np.ndarray:
    """Conditional variances sigma2_1..sigma2_n."""
    eps = _residuals(values, params.mu)
    return _filter_eps(eps, params.omega, params.alpha, params.beta_g)


def _loglik_eps(eps, omega, alpha, beta_g) -> float:
    s2 = _filter_eps(eps, omega, alpha, beta_g)
    if not np.all(s2 > 0):
        return -math.inf
    return float(-0.5 * np.sum(_LOG_2PI + np.log(s2) + eps * eps / s2))


def garch_loglik(values: Sequence[float], params: GarchParams) -> float:
    """Gaussian log-likelihood of the filtered series."""
    eps = _residuals(values, params.mu)
    return _loglik_eps(eps, params.omega, params.alpha, params.beta_g)


def _unpack(z):
    """Unconstrained vector -> (omega, alpha, beta_g) inside the stationary region."""
    omega = math.exp(z[0])
    persistence = MAX_PERSISTENCE / (1.0 + math.exp(-z[1]))
    share = 1.0 / (1.0 + math.exp(-z[2]))
    return omega, persistence * share, persistence * (1.0 - share)


def _pack(omega, alpha, beta_g):
    p = alpha + beta_g
    share = alpha / p
    return np.array([math.log(omega), math.log(p / (MAX_PERSISTENCE - p)),
                     math.log(share / (1.0 - share))])


def garch_fit(values: Sequence[float]) -> GarchParams:
    """Maximum-likelihood GARCH(1,1) parameters; see :func:`fit_garch`."""
    return fit_garch(values).params


def fit_garch(values: Sequence[float], n_starts: int = 3) -> GarchFit:
    """Maximum-likelihood fit from a variance-targeted grid plus Nelder-Mead.

    Every (alpha, beta_g) pair on the 0.05..0.9 grid with alpha + beta_g <= 0.98
    is scored with omega = var * (1 - alpha - beta_g); the ``n_starts`` best
    grid points are refined and the best point seen anywhere is returned.
    """
    x = finite_or_raise(values)
    if x.size < MIN_FIT_N:
        raise InputError(f"garch_fit needs at least {MIN_FIT_N} observations, got {x.size}")
    mu = float(x.mean())
    eps = x - mu
    var = float(np.var(eps))
    if not var > 0:
        raise FitError("series has zero variance", {"n": int(x.size), "variance": var})

    grid = []
    for a in GRID:
        for b in GRID:
            if a + b <= MAX_PERSISTENCE + 1e-12:
                omega = var * (1.0 - a - b)
                grid.append((_loglik_eps(eps, omega, a, b), omega, float(a), float(b)))
    finite = [g for g in grid if math.isfinite(g[0])]
    if not finite:
        raise FitError("no grid start has a finite likelihood", {"n": int(x.size), "variance": var})
    finite.sort(key=lambda g: -g[0])

    def negll(z):
        try:
            omega, a, b = _unpack(z)
        except OverflowError:
            return math.inf
        ll = _loglik_eps(eps, omega, a, b)
        return -ll if math.isfinite(ll) else math.inf

    best = finite[0]
    refined = []
    for ll0, omega, a, b in finite[:n_starts]:
        res = minimize(negll, _pack(omega, a, b), method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000, "maxfev": 8000})
        refined.append({"start": [omega, a, b], "loglik": float(-res.fun), "nit": int(res.nit)})
        if math.isfinite(res.fun) and -res.fun > best[0]:
            best = (float(-res.fun), *_unpack(res.x))
    ll, omega, a, b = best
    try:
        params = GarchParams(omega, a, b, mu)
    except ParameterError as exc:
        raise FitError(f"optimum violates constraints: {exc}", {"refined": refined}) from exc
    return GarchFit(params, ll, int(x.size), {"grid_points": len(grid), "refined": refined})


def simulate_garch(params: GarchParams, n: int, rng: np.random.Generator, burn: int = 500) -> np.ndarray:
    """Gaussian GARCH(1,1) path started from the unconditional variance."""
    z = rng.standard_normal(n + burn)
    out = np.empty(n + burn)
    s2 = params.unconditional_variance
    e_prev = 0.0
    for t in range(n + burn):
        s2 = params.omega + params.alpha * e_prev ** 2 + params.beta_g * s2 if t else s2
        e_prev = math.sqrt(s2) * z[t]
        out[t] = e_prev
    return params.mu + out[burn:]
