"""Generalized Gaussian entropy model.

The density is proportional to ``exp(-(|x - mu| / alpha) ** beta)``; integer
symbols get the probability mass of the unit bin around them.  The CDF is
expressed through the regularized lower incomplete gamma function::

    c(x) = 1/2 + sign(x - mu) / 2 * P(1/beta, (|x - mu| / alpha) ** beta)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coder import CdfTable

__all__ = [
    "ALPHA_MIN",
    "DEFAULT_BETA",
    "P_MIN",
    "DiscretePMF",
    "GGMParams",
    "build_cdf_table",
    "discrete_pmf",
    "ggm_cdf",
    "ggm_fit_moment",
    "ggm_pmf_integer",
    "ggm_sample",
    "log_gamma",
    "rate_bits",
    "reg_lower_incomplete_gamma",
]

DEFAULT_BETA = 1.5
P_MIN = 2.0**-16
ALPHA_MIN = 0.01
SYMBOL_MIN = -(2**11)
SYMBOL_MAX = 2**11 - 1

_EPS = 1e-12
_MAX_ITER = 500
_TINY = 1e-300


@dataclass(frozen=True)
class GGMParams:
    mu: float = 0.0
    alpha: float = 1.0
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


@dataclass(frozen=True)
class DiscretePMF:
    """Floored, renormalized probabilities of ``min_symbol, min_symbol + 1, ...``."""

    min_symbol: int
    probs: np.ndarray

    @property
    def max_symbol(self) -> int:
        return self.min_symbol + len(self.probs) - 1


def log_gamma(x: float) -> float:
    if not x > 0:
        raise ValueError(f"log_gamma is defined here for x > 0 only, got {x}")
    return math.lgamma(x)


def _lgamma_array(a: np.ndarray) -> np.ndarray:
    uniq, inv = np.unique(a, return_inverse=True)
    vals = np.array([math.lgamma(float(u)) for u in uniq])
    return vals[inv].reshape(a.shape)


def _gamma_p(a, x) -> np.ndarray:
    """Vectorized regularized lower incomplete gamma P(a, x).

    Series expansion below ``a + 1``, modified Lentz continued fraction for the
    upper function above it.
    """
    a, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(x, dtype=np.float64))
    out = np.zeros(a.shape)
    pos = x > 0
    use_series = pos & (x < a + 1)
    use_cf = pos & ~use_series

    if use_series.any():
        aa, xx = a[use_series], x[use_series]
        ap = aa.copy()
        term = 1.0 / aa
        total = term.copy()
        for _ in range(_MAX_ITER):
            ap += 1.0
            term *= xx / ap
            total += term
            if np.all(np.abs(term) < np.abs(total) * _EPS):
                break
        out[use_series] = total * np.exp(-xx + aa * np.log(xx) - _lgamma_array(aa))

    if use_cf.any():
        aa, xx = a[use_cf], x[use_cf]
        b = xx + 1.0 - aa
        c = np.full(aa.shape, 1.0 / _TINY)
        d = 1.0 / b
        h = d.copy()
        for i in range(1, _MAX_ITER + 1):
            an = -i * (i - aa)
            b += 2.0
            d = an * d + b
            d[np.abs(d) < _TINY] = _TINY
            c = b + an / c
            c[np.abs(c) < _TINY] = _TINY
            d = 1.0 / d
            delta = d * c
            h *= delta
            if np.all(np.abs(delta - 1.0) < _EPS):
                break
        q = np.exp(-xx + aa * np.log(xx) - _lgamma_array(aa)) * h
        out[use_cf] = 1.0 - q
    return out


def reg_lower_incomplete_gamma(a: float, x: float) -> float:
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if not x >= 0:
        raise ValueError(f"x must be non-negative, got {x}")
    return float(_gamma_p(a, x))


def _cdf(mu, alpha, beta, x) -> np.ndarray:
    t = np.asarray(x, dtype=np.float64) - mu
    z = np.abs(t) / alpha
    return 0.5 + 0.5 * np.sign(t) * _gamma_p(1.0 / np.asarray(beta, dtype=np.float64), z**beta)


def ggm_cdf(params: GGMParams, x):
    """CDF at ``x``; returns a float for scalar input, an array otherwise."""
    out = _cdf(params.mu, params.alpha, params.beta, x)
    return float(out) if out.ndim == 0 else out


def _bin_mass(mu, alpha, beta, k) -> np.ndarray:
    return _cdf(mu, alpha, beta, k + 0.5) - _cdf(mu, alpha, beta, k - 0.5)


def ggm_pmf_integer(params: GGMParams, k, floor: bool = True):
    """Mass of the unit bin around ``k``, floored at ``P_MIN`` unless ``floor`` is false."""
    out = _bin_mass(params.mu, params.alpha, params.beta, np.asarray(k, dtype=np.float64))
    if floor:
        out = np.maximum(out, P_MIN)
    return float(out) if out.ndim == 0 else out


def discrete_pmf(params: GGMParams, min_symbol: int, max_symbol: int) -> DiscretePMF:
    """PMF over ``[min_symbol, max_symbol]`` with tail mass folded into the end bins.

    Bins below ``P_MIN`` are raised to it and the excess is taken
    proportionally from the remaining bins, so every entry stays >= ``P_MIN``.
    """
    if min_symbol > max_symbol:
        raise ValueError(f"empty symbol range [{min_symbol}, {max_symbol}]")
    if min_symbol == max_symbol:
        return DiscretePMF(min_symbol, np.ones(1))
    edges = np.arange(min_symbol, max_symbol, dtype=np.float64) + 0.5
    c = _cdf(params.mu, params.alpha, params.beta, edges)
    probs = np.diff(np.concatenate(([0.0], c, [1.0])))
    if len(probs) * P_MIN > 1.0:
        raise ValueError(f"{len(probs)} symbols cannot all hold probability {P_MIN}")
    floored = np.zeros(len(probs), dtype=bool)
    while True:
        floored |= probs < P_MIN
        rest = probs[~floored]
        probs = np.where(floored, P_MIN, probs * ((1.0 - P_MIN * floored.sum()) / rest.sum()))
        if not np.any(probs[~floored] < P_MIN):
            return DiscretePMF(min_symbol, probs)


def quantize_pmf(pmf: DiscretePMF, total_bits: int = 16) -> CdfTable:
    total = 1 << total_bits
    n = len(pmf.probs)
    if n > total:
        raise ValueError(f"{n} symbols do not fit a table with total {total}")
    freqs = np.maximum(np.rint(pmf.probs * total).astype(np.int64), 1)
    diff = total - int(freqs.sum())
    while diff:
        # spread the rounding error over the bins tied for the largest count
        top_value = int(freqs.max())
        top = np.flatnonzero(freqs == top_value)
        if diff > 0:
            step = max(diff // len(top), 1)
        else:
            below = freqs[freqs < top_value]
            room = top_value - max(int(below.max()) if below.size else 1, 1)
            if room == 0:
                raise ValueError("cannot quantize PMF without zero-frequency symbols")
            step = -min(max(-diff // len(top), 1), room)
        top = top[:max(1, min(len(top), abs(diff) // abs(step)))]
        freqs[top] += step
        diff -= step * len(top)
    return CdfTable.from_freqs(freqs.tolist(), pmf.min_symbol)


def build_cdf_table(
    params: GGMParams, min_symbol: int, max_symbol: int, total_bits: int = 16
) -> CdfTable:
    if not 8 <= total_bits <= 16:
        raise ValueError(f"total_bits must be in [8, 16], got {total_bits}")
    if max_symbol - min_symbol + 1 > (1 << total_bits):
        raise ValueError(
            f"range [{min_symbol}, {max_symbol}] is too wide for {total_bits}-bit tables"
        )
    return quantize_pmf(discrete_pmf(params, min_symbol, max_symbol), total_bits)


def _param_arrays(params_seq, n):
    if isinstance(params_seq, GGMParams):
        return params_seq.mu, params_seq.alpha, params_seq.beta
    if len(params_seq) != n:
        raise ValueError(f"{len(params_seq)} parameter sets for {n} symbols")
    mu = np.fromiter((p.mu for p in params_seq), np.float64, n)
    alpha = np.fromiter((p.alpha for p in params_seq), np.float64, n)
    beta = np.fromiter((p.beta for p in params_seq), np.float64, n)
    return mu, alpha, beta


def rate_bits(params_seq: Sequence[GGMParams] | GGMParams, symbols: Sequence[int]) -> float:
    """Total ideal code length in bits under the floored integer PMF.

    ``params_seq`` may be a single :class:`GGMParams` shared by all symbols.
    """
    k = np.asarray(symbols, dtype=np.float64)
    if k.size == 0:
        if not isinstance(params_seq, GGMParams) and len(params_seq):
            raise ValueError(f"{len(params_seq)} parameter sets for 0 symbols")
        return 0.0
    mu, alpha, beta = _param_arrays(params_seq, k.size)
    p = np.maximum(_bin_mass(mu, alpha, beta, k), P_MIN)
    return float(np.sum(-np.log2(p)))


def ggm_fit_moment(
    samples: Sequence[float],
    beta: float = DEFAULT_BETA,
    mu: float | None = 0.0,
    alpha_min: float = ALPHA_MIN,
) -> GGMParams:
    """Moment-matched scale from ``E|X - mu| = alpha * G(2/beta) / G(1/beta)``.

    ``mu=None`` uses the sample mean as the location.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("need at least one sample")
    loc = float(x.mean()) if mu is None else float(mu)
    mad = float(np.mean(np.abs(x - loc)))
    alpha = mad * math.exp(math.lgamma(1.0 / beta) - math.lgamma(2.0 / beta))
    return GGMParams(loc, max(alpha, alpha_min), beta)


def ggm_sample(params: GGMParams, size, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw continuous samples; ``|X - mu| / alpha`` is ``Gamma(1/beta) ** (1/beta)``."""
    rng = np.random.default_rng() if rng is None else rng
    g = rng.gamma(1.0 / params.beta, 1.0, size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return params.mu + sign * params.alpha * g ** (1.0 / params.beta)
