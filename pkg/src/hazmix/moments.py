"""Conditional moments of the random survival function under the extended gamma prior.

Notation follows the usual one for this model: observations sorted in
decreasing order ``X_1 > ... > X_n`` with sentinels ``X_0 = inf`` and
``X_{n+1} = 0``, partial sums ``xi_l = X_1 + ... + X_l``, kernel height
``beta`` and exponential base measure with rate ``lam``.  With censoring the
sorted sequence contains every observed time; only exact observations carry
latent locations.

The closed form integrates ``log(1 + r (t - y) / (xi_i - i y + 1/beta))``
against ``lam exp(-lam y)`` piecewise by parts, which leaves exponential
integrals of the linear functions ``f_{i,r}``.  Everything is written with
``exp(-z) Ei(z)`` so that large arguments do not overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .special import eie_fast

TIE_EPS = 1e-9
EI_GUARD = 1e-9


@dataclass(frozen=True)
class SurvivalData:
    """Observed times with exact/censored flags and the sorted view the formulas need.

    ``times``/``events`` keep input order.  ``xs`` is ``[inf, X_1, ..., X_n, 0]``
    (strictly decreasing after tie perturbation) and ``xi[l]`` the sum of the
    ``l`` largest times.  ``rank[i]`` is the 1-based sorted position of input
    observation ``i``.
    """

    times: np.ndarray
    events: np.ndarray
    xs: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    rank: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, times, events=None) -> "SurvivalData":
        t = np.asarray(times, dtype=float).ravel()
        if t.size == 0:
            raise ValueError("no observations")
        if np.any(~np.isfinite(t)) or np.any(t <= 0):
            raise ValueError("observed times must be positive and finite")
        e = np.ones(t.size, dtype=np.int64) if events is None else np.asarray(events).astype(np.int64).ravel()
        if e.shape != t.shape or np.any((e != 0) & (e != 1)):
            raise ValueError("events must be 0/1 flags, one per time")
        # stable sort keeps input order among ties; j-th duplicate gets j*eps subtracted
        order = np.argsort(-t, kind="stable")
        sorted_t = t[order].copy()
        eps = TIE_EPS * t.mean()
        run = 0
        for j in range(1, sorted_t.size):
            if t[order[j]] == t[order[j - 1]]:
                run += 1
                sorted_t[j] = t[order[j]] - run * eps
            else:
                run = 0
        perturbed = np.empty_like(t)
        perturbed[order] = sorted_t
        rank = np.empty(t.size, dtype=np.int64)
        rank[order] = np.arange(1, t.size + 1)
        xs = np.concatenate(([np.inf], sorted_t, [0.0]))
        xi = np.concatenate(([0.0], np.cumsum(sorted_t)))
        return cls(perturbed, e, xs, xi, rank)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def exact_index(self) -> np.ndarray:
        return np.flatnonzero(self.events == 1)

    @property
    def n_exact(self) -> int:
        return int(self.events.sum())

    @property
    def max_time(self) -> float:
        return float(self.xs[1])

    def exposure(self, y):
        """``sum_l (T_l - y)^+`` over all observed times (cumulative kernel / beta)."""
        y = np.asarray(y, dtype=float)
        return _exposure_many(self.xs, self.xi, np.atleast_1d(y)).reshape(y.shape)


@dataclass(frozen=True)
class KernelSpec:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("kernel height beta must be positive")

    def cumulative(self, t, y):
        """``K_t(y) = beta (t - y)^+``."""
        return self.beta * np.maximum(np.asarray(t, float) - np.asarray(y, float), 0.0)


@dataclass(frozen=True)
class PriorSpec:
    """Gamma CRM total mass ``c``, exponential base measure rate ``lam`` and hyperpriors.

    The hyperpriors are Gamma(shape, rate) for both ``c`` and ``beta``.
    """

    lam: float = 1.0
    c: float = 1.0
    c_shape: float = 1.0
    c_rate: float = 1.0 / 3.0
    beta_shape: float = 1.0
    beta_rate: float = 1.0 / 3.0

    def __post_init__(self):
        if not (self.lam > 0 and self.c > 0):
            raise ValueError("lam and c must be positive")


@dataclass(frozen=True)
class ClusterState:
    """Distinct latent locations with total and exact multiplicities."""

    locations: np.ndarray
    sizes: np.ndarray
    exact_sizes: np.ndarray

    @classmethod
    def from_latents(cls, latents, exact=None) -> "ClusterState":
        y = np.asarray(latents, dtype=float)
        ex = np.ones(y.size, dtype=bool) if exact is None else np.asarray(exact, dtype=bool)
        keep = ~np.isnan(y)
        if not keep.any():
            return cls.empty()
        loc, inv = np.unique(y[keep], return_inverse=True)
        sizes = np.bincount(inv, minlength=loc.size)
        exact_sizes = np.bincount(inv, weights=ex[keep].astype(float), minlength=loc.size).astype(np.int64)
        return cls(loc, sizes, exact_sizes)

    @classmethod
    def empty(cls) -> "ClusterState":
        return cls(np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64))

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.exact_sizes))

    def check(self, data: SurvivalData, latents=None) -> None:
        if np.any(self.locations < 0):
            raise ValueError("latent locations must be nonnegative")
        if self.exact_sizes.sum() > data.n_exact:
            raise ValueError("more exact cluster members than exact observations")
        if latents is not None:
            y = np.asarray(latents, float)
            t = data.times[data.exact_index]
            if y.shape != t.shape or np.any(y < 0) or np.any(y >= t):
                raise ValueError("each latent must satisfy 0 <= Y_i < T_i")


def f_ir(data: SurvivalData, kernel: KernelSpec, prior: PriorSpec, i: int, r: float, t: float, x: float) -> float:
    """``lam * ((xi_i + 1/beta + r t) / (i + r) - x)``."""
    if i + r <= 0:
        raise ValueError("f_{i,r} needs i + r > 0")
    return prior.lam * ((data.xi[i] + 1.0 / kernel.beta + r * t) / (i + r) - x)


# ---------------------------------------------------------------- compiled core

@njit(cache=True)
def _exposure(xs, xi, y):
    # number of times strictly above y, by bisection on the decreasing xs[1:n+1]
    lo, hi = 0, xs.size - 2
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if xs[mid] > y:
            lo = mid
        else:
            hi = mid - 1
    return xi[lo] - lo * y


@njit(cache=True)
def _exposure_many(xs, xi, ys):
    out = np.empty(ys.size)
    for k in range(ys.size):
        out[k] = _exposure(xs, xi, ys[k])
    return out


@njit(cache=True)
def _scaled_tail(lam, kappa, lo, hi):
    # int_lo^hi exp(-lam y) / (kappa - y) dy  for kappa > hi
    return (math.exp(-lam * lo) * eie_fast(lam * (kappa - lo))
            - math.exp(-lam * hi) * eie_fast(lam * (kappa - hi)))


@njit(cache=True)
def interval_integrals(xs, xi, lam, beta):
    """``S_i = int_{X_{i+1}}^{X_i} exp(-lam y) / (kappa_i - y) dy`` with ``kappa_i = (xi_i + 1/beta)/i``.

    Index 0 is unused (zero).
    """
    n = xs.size - 2
    out = np.zeros(n + 1)
    inv_b = 1.0 / beta
    for i in range(1, n + 1):
        out[i] = _scaled_tail(lam, (xi[i] + inv_b) / i, xs[i + 1], xs[i])
    return out


@njit(cache=True)
def _first_active(xs, t):
    # index i of the interval [X_{i+1}, X_i) that contains t (n if t <= X_n)
    lo, hi = 0, xs.size - 2
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if xs[mid] >= t:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True)
def _integral_part(xs, xi, ex, lam, beta, t, r, i0, tail0_partial, tail0_rest):
    # int_0^t log(1 + r (t-y)/(D(y) + 1/beta)) lam e^{-lam y} dy with D piecewise linear.
    # Integrating by parts on each interval, the boundary log terms telescope
    # (D is continuous) and leave only the value at y = 0.
    n = xs.size - 2
    inv_b = 1.0 / beta
    total = math.log1p(r * t / (xi[n] + inv_b)) + tail0_partial + tail0_rest
    for i in range(i0, n + 1):
        hi = min(xs[i], t)
        lo = xs[i + 1]
        kr = (xi[i] + inv_b + r * t) / (i + r)
        e_hi = math.exp(-lam * hi) if i == i0 else ex[i]
        total -= ex[i + 1] * eie_fast(lam * (kr - lo)) - e_hi * eie_fast(lam * (kr - hi))
    return total


@njit(cache=True)
def _min_ei_argument(xs, xi, lam, beta, t, order):
    # smallest f_{i,r} / f_{i,0} argument reached on the active intervals
    n = xs.size - 2
    inv_b = 1.0 / beta
    m = np.inf
    for i in range(_first_active(xs, t), n + 1):
        hi = min(xs[i], t)
        for r in range(order + 1):
            if i + r == 0:
                continue
            v = lam * ((xi[i] + inv_b + r * t) / (i + r) - hi)
            if v < m:
                m = v
    return m


@njit(cache=True)
def log_moment_table(xs, xi, lam, c, beta, loc, nstar, grid, order, shift):
    """``log E[S(t)^r | data, latents, c, beta]`` for every ``t`` in ``grid`` and ``r = 1..order``."""
    n = xs.size - 2
    inv_b = 1.0 / beta
    full_tail = interval_integrals(xs, xi, lam, beta)
    # suffix sums of the r = 0 tails over complete intervals
    rest = np.zeros(n + 2)
    for i in range(n, 0, -1):
        rest[i] = rest[i + 1] + full_tail[i]
    ex = np.empty(n + 2)
    for i in range(n + 2):
        ex[i] = math.exp(-lam * xs[i])
    den = np.empty(loc.size)
    for j in range(loc.size):
        den[j] = _exposure(xs, xi, loc[j]) + inv_b
    # every Ei argument is >= lam / (beta (i + r)); only near-degenerate beta needs the check
    guard = lam * inv_b / (n + order) < EI_GUARD
    out = np.empty((grid.size, order))
    for g in range(grid.size):
        t = grid[g]
        if t <= 0.0:
            out[g, :] = 0.0
            continue
        if guard and _min_ei_argument(xs, xi, lam, beta, t, order) < EI_GUARD:
            t = t + shift
        i0 = _first_active(xs, t)
        partial = 0.0
        if i0 > 0:
            partial = _scaled_tail(lam, (xi[i0] + inv_b) / i0, xs[i0 + 1], min(xs[i0], t))
        for r in range(1, order + 1):
            val = -c * _integral_part(xs, xi, ex, lam, beta, t, float(r), i0, partial, rest[i0 + 1])
            for j in range(loc.size):
                if t > loc[j] and nstar[j] > 0:
                    val -= nstar[j] * math.log1p(r * (t - loc[j]) / den[j])
            out[g, r - 1] = val
    return out


# ---------------------------------------------------------------- public API

def _cluster_arrays(clusters: ClusterState | None):
    if clusters is None:
        return np.zeros(0), np.zeros(0)
    return (np.ascontiguousarray(clusters.locations, dtype=float),
            np.ascontiguousarray(clusters.exact_sizes, dtype=float))


def moment_table(data: SurvivalData, lam: float, c: float, beta: float, clusters: ClusterState | None,
                 grid, order: int) -> np.ndarray:
    """Conditional moments ``E[S(t)^r | ...]`` as a ``(len(grid), order)`` array."""
    grid = np.ascontiguousarray(np.atleast_1d(grid), dtype=float)
    loc, nstar = _cluster_arrays(clusters)
    span = max(float(grid.max(initial=0.0)), data.max_time)
    return np.exp(log_moment_table(data.xs, data.xi, float(lam), float(c), float(beta), loc, nstar,
                                   grid, int(order), EI_GUARD * span))


def conditional_moment_closed(data: SurvivalData, kernel: KernelSpec, prior: PriorSpec,
                              clusters: ClusterState | None, t: float, r: int) -> float:
    """Closed-form ``E[S(t)^r | X, Y, c, beta]`` (exponential-integral expression)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if r < 1 or int(r) != r:
        raise ValueError("r must be a positive integer")
    if clusters is not None:
        clusters.check(data)
    if t == 0:
        return 1.0
    return float(moment_table(data, prior.lam, prior.c, kernel.beta, clusters, [t], int(r))[0, -1])


def log_cumulative_intensity(data: SurvivalData, lam: float, beta: float) -> float:
    """``int log(1 + beta sum_l (T_l - y)^+) lam e^{-lam y} dy``.

    Integrating by parts telescopes the boundary terms, leaving
    ``log(1 + beta xi_n) - sum_i S_i``.
    """
    tails = interval_integrals(data.xs, data.xi, float(lam), float(beta))
    return math.log1p(beta * data.xi[-1]) - float(tails.sum())
