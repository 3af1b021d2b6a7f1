"""Weighted sampling from a reconstructed density and the summaries built on it.

Draws come from the Beta proposal whose shapes match the basis weight, so the
importance ratio ``f_N / p`` reduces to ``B(a, b)`` times the polynomial part
of the expansion.  Interval and mode computations work directly on the
density, on a grid that adapts to where the weight puts its mass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .polyapprox import ApproxDensity

DEFAULT_SAMPLES = 10_000
GRID_POINTS = 4096
WINDOW_TAIL = 1e-12
FLAT_RTOL = 1e-10


class ZeroWeights(FloatingPointError):
    """Every proposal landed where the reconstructed density is not positive."""


@dataclass(frozen=True)
class WeightedSample:
    values: np.ndarray   # sorted ascending
    weights: np.ndarray  # normalised, aligned with values

    def __post_init__(self):
        if self.values.shape != self.weights.shape or self.values.size == 0:
            raise ValueError("values and weights must be non-empty and of equal length")

    @property
    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights ** 2))

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.values))

    @classmethod
    def from_unnormalised(cls, values, weights) -> "WeightedSample":
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if not total > 0:
            raise ZeroWeights("all importance weights are zero")
        order = np.argsort(values, kind="stable")
        return cls(values[order], weights[order] / total)

    @classmethod
    def point_mass(cls, x: float) -> "WeightedSample":
        return cls(np.array([float(x)]), np.array([1.0]))


def importance_sample(d: ApproxDensity, n: int, rng: np.random.Generator) -> WeightedSample:
    """``n`` Beta(a, b) proposals weighted by ``max(f_N, 0) / p``."""
    if n < 1:
        raise ValueError("need at least one draw")
    a, b = d.params.a, d.params.b
    s = rng.beta(a, b, size=n)
    # f_N / p = B(a, b) * poly; the constant cancels on normalisation
    w = np.maximum(d.polynomial(s), 0.0)
    return WeightedSample.from_unnormalised(s, w)


def weighted_cdf_at(ws: WeightedSample, x: float) -> float:
    """Right-continuous weighted empirical CDF."""
    k = np.searchsorted(ws.values, x, side="right")
    return float(min(1.0, ws.weights[:k].sum()))


def weighted_quantile(ws: WeightedSample, p: float) -> float:
    """Generalised inverse ``inf{x : F(x) >= p}``."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    cum = np.cumsum(ws.weights)
    k = int(np.searchsorted(cum, p - 1e-12, side="left"))
    return float(ws.values[min(k, ws.values.size - 1)])


def support_window(d: ApproxDensity) -> tuple[float, float]:
    """Interval outside which the Beta weight carries less than ``1e-12`` mass on each side."""
    a, b = d.params.a, d.params.b
    lo = float(stats.beta.ppf(WINDOW_TAIL, a, b))
    hi = float(stats.beta.isf(WINDOW_TAIL, a, b))
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        return 0.0, 1.0
    pad = 0.05 * (hi - lo)
    return max(0.0, lo - pad), min(1.0, hi + pad)


def _cells(d: ApproxDensity, n: int = GRID_POINTS):
    lo, hi = support_window(d)
    h = (hi - lo) / n
    mids = lo + h * (np.arange(n) + 0.5)
    return mids, h, d.piN_unnorm(mids)


@dataclass(frozen=True)
class HPDInterval:
    lo: float
    hi: float
    mass: float
    contiguous: bool

    def __iter__(self):
        return iter((self.lo, self.hi))


def hpd_interval(d: ApproxDensity, level: float = 0.95) -> HPDInterval:
    """Highest-density interval of the normalised positive part of ``f_N``.

    When the super-level set splits into several pieces the smallest interval
    covering all of them is returned with ``contiguous=False``.
    """
    if not 0.0 < level <= 1.0:
        raise ValueError("level must lie in (0, 1]")
    mids, h, f = _cells(d)
    total = f.sum()
    if not total > 0:
        raise ZeroWeights("reconstructed density has no positive part")
    order = np.argsort(-f, kind="stable")
    cum = np.cumsum(f[order]) / total
    k = int(np.searchsorted(cum, level - 1e-12)) + 1
    chosen = np.zeros(f.size, dtype=bool)
    chosen[order[:min(k, f.size)]] = True
    chosen &= f > 0
    idx = np.flatnonzero(chosen)
    contiguous = bool(idx[-1] - idx[0] + 1 == idx.size)
    lo = max(0.0, mids[idx[0]] - h / 2)
    hi = min(1.0, mids[idx[-1]] + h / 2)
    mass = float(f[idx[0]:idx[-1] + 1].sum() / total)
    return HPDInterval(float(lo), float(hi), mass, contiguous)


def _golden_max(fn, lo: float, hi: float, tol: float = 1e-12) -> float:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    while hi - lo > tol * max(1.0, abs(lo)):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - g * (hi - lo)
            f1 = fn(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + g * (hi - lo)
            f2 = fn(x2)
    return 0.5 * (lo + hi)


def mode_estimate(d: ApproxDensity) -> float:
    """Location of the maximum of ``max(f_N, 0)``; 0.5 for a flat density."""
    a, b = d.params.a, d.params.b
    # unbounded weight at an endpoint wins whenever the polynomial is positive there
    if a < 1.0 and d.polynomial(0.0) > 0:
        return 0.0
    if b < 1.0 and d.polynomial(1.0) > 0:
        return 1.0
    mids, h, f = _cells(d)
    top = f.max()
    if not top > 0:
        raise ZeroWeights("reconstructed density has no positive part")
    if top - f.min() <= FLAT_RTOL * top and mids[0] - h / 2 <= 0 and mids[-1] + h / 2 >= 1:
        return 0.5
    j = int(np.argmax(f))
    lo = max(0.0, mids[j] - h)
    hi = min(1.0, mids[j] + h)
    fn = lambda x: float(d.piN_unnorm(np.clip(x, 0.0, 1.0)))
    x = _golden_max(fn, lo, hi)
    # a boundary maximum shows up as the search collapsing onto the edge
    for edge in (0.0, 1.0):
        if abs(x - edge) < 2 * h and fn(edge) >= fn(x):
            return edge
    return float(x)
