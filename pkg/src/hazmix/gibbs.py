"""Marginal Gibbs sampler over latent locations and the hyperparameters ``(c, beta)``.

One sweep updates every latent (input order of the exact observations),
then ``c``, then ``beta``.  After burn-in each iteration contributes the
conditional moments ``E[S(t)^r | X, Y, c, beta]`` on the time grid, and the
running averages are the posterior moment estimates.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .moments import (ClusterState, PriorSpec, SurvivalData, _exposure, interval_integrals,
                      log_cumulative_intensity, log_moment_table, EI_GUARD)


G0_TABLE_SIZE = 2048


@dataclass(frozen=True)
class GibbsConfig:
    l_max: int = 10_000
    l_min: int = 1_000
    seed: int = 0
    order: int = 10
    q: int = 50
    M: float = 1.0
    lam: float = 1.0
    c_shape: float = 1.0
    c_rate: float = 1.0 / 3.0
    beta_shape: float = 1.0
    beta_rate: float = 1.0 / 3.0
    debug: bool = False

    def __post_init__(self):
        if not 0 <= self.l_min < self.l_max:
            raise ValueError("need 0 <= l_min < l_max")
        if self.order < 2:
            raise ValueError("at least two moments are needed")
        if self.q < 2:
            raise ValueError("grid needs at least two points")
        if not self.M > 0:
            raise ValueError("M must be positive")

    @property
    def grid(self) -> np.ndarray:
        """``t_i = i M / q`` for ``i = 1..q`` (zero excluded: S(0) = 1)."""
        return self.M * np.arange(1, self.q + 1) / self.q

    @property
    def prior(self) -> PriorSpec:
        return PriorSpec(lam=self.lam, c_shape=self.c_shape, c_rate=self.c_rate,
                         beta_shape=self.beta_shape, beta_rate=self.beta_rate)


@dataclass
class GibbsState:
    """Latents (one per exact observation, input order), total mass ``c`` and kernel height ``beta``."""

    latents: np.ndarray
    c: float
    beta: float

    @property
    def clusters(self) -> ClusterState:
        return ClusterState.from_latents(self.latents)

    @property
    def k(self) -> int:
        return int(np.unique(self.latents).size)

    @classmethod
    def initial(cls, data: SurvivalData, rng: np.random.Generator) -> "GibbsState":
        upper = data.times[data.exact_index]
        return cls(rng.random(upper.size) * upper, 1.0, 1.0)


@dataclass
class MomentEstimates:
    grid: np.ndarray
    moments: np.ndarray          # (q, N): hat mu_{r,t}, r = 1..N
    first_moment_trace: np.ndarray  # (l_max - l_min, q)
    params_trace: np.ndarray = field(repr=False)  # (l_max, 4): l, c, beta, k

    @property
    def order(self) -> int:
        return self.moments.shape[1]

    def moment_sequence(self, g: int) -> np.ndarray:
        """``(1, mu_1, ..., mu_N)`` at grid index ``g``."""
        return np.concatenate(([1.0], self.moments[g]))


# ------------------------------------------------------------- latent update

@njit(cache=True)
def _g0_draw(upper, xs, xi, lam, beta, u):
    # inverse CDF of exp(-lam y)/(D(y) + 1/beta) on [0, upper), trapezoid table
    m = G0_TABLE_SIZE
    h = upper / (m - 1)
    inv_b = 1.0 / beta
    n = xs.size - 2
    cnt = n
    dens = np.empty(m)
    for k in range(m):
        y = k * h
        while cnt > 0 and xs[cnt] <= y:
            cnt -= 1
        dens[k] = math.exp(-lam * y) / (xi[cnt] - cnt * y + inv_b)
    cdf = np.empty(m)
    cdf[0] = 0.0
    for k in range(1, m):
        cdf[k] = cdf[k - 1] + 0.5 * h * (dens[k - 1] + dens[k])
    target = u * cdf[m - 1]
    lo, hi = 0, m - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cdf[mid] <= target:
            lo = mid
        else:
            hi = mid
    width = cdf[hi] - cdf[lo]
    frac = (target - cdf[lo]) / width if width > 0 else 0.0
    y = (lo + frac) * h
    if y >= upper:
        y = upper * (1.0 - 2.0 ** -52)
    return y


@njit(cache=True)
def _latent_step(i, latents, expo, upper, rank, xs, xi, lam, beta, new_mass, u_sel, u_pos):
    # new_mass[p]: c lam sum_{j >= p} S_j / j for an observation of sorted rank p
    inv_b = 1.0 / beta
    p0 = new_mass[rank[i]]
    atoms = 0.0
    for j in range(latents.size):
        if j != i and latents[j] < upper[i]:
            atoms += 1.0 / (expo[j] + inv_b)
    total = p0 + atoms
    if not total > 0.0:
        return -1
    target = u_sel * total
    if target < p0 or atoms == 0.0:
        y = _g0_draw(upper[i], xs, xi, lam, beta, u_pos)
        latents[i] = y
        expo[i] = _exposure(xs, xi, y)
        return 0
    acc = p0
    pick = -1
    for j in range(latents.size):
        if j != i and latents[j] < upper[i]:
            acc += 1.0 / (expo[j] + inv_b)
            pick = j
            if acc > target:
                break
    latents[i] = latents[pick]
    expo[i] = expo[pick]
    return 1


@njit(cache=True)
def _sweep(latents, expo, upper, rank, xs, xi, lam, beta, new_mass, uniforms):
    m = latents.size
    for i in range(m):
        if _latent_step(i, latents, expo, upper, rank, xs, xi, lam, beta, new_mass,
                        uniforms[i], uniforms[m + i]) < 0:
            return i
    return -1


def new_cluster_mass(data: SurvivalData, lam: float, c: float, beta: float) -> np.ndarray:
    """``c lam sum_{j=p}^n S_j / j`` indexed by sorted rank ``p`` (entry ``n+1`` is 0)."""
    tails = interval_integrals(data.xs, data.xi, float(lam), float(beta))
    n = data.n
    per = np.zeros(n + 2)
    per[1:n + 1] = tails[1:] / np.arange(1, n + 1)
    return c * lam * np.cumsum(per[::-1])[::-1]


def _exact_arrays(data: SurvivalData):
    idx = data.exact_index
    return np.ascontiguousarray(data.times[idx]), np.ascontiguousarray(data.rank[idx])


def latent_weights(i: int, state: GibbsState, data: SurvivalData, lam: float = 1.0):
    """Normalised full-conditional weights for latent ``i``.

    Returns ``(p_new, values, p_atoms)``: the probability of a fresh draw
    from ``G_0`` and, for each distinct value among the other latents, its
    probability.
    """
    upper, rank = _exact_arrays(data)
    p0 = new_cluster_mass(data, lam, state.c, state.beta)[rank[i]]
    others = np.delete(state.latents, i)
    values, counts = np.unique(others, return_counts=True)
    w = np.where(values < upper[i], counts / (data.exposure(values) + 1.0 / state.beta), 0.0)
    total = p0 + w.sum()
    if not total > 0:
        raise FloatingPointError("full conditional of the latent has zero total mass")
    return p0 / total, values, w / total


def update_latent(i: int, state: GibbsState, data: SurvivalData, rng: np.random.Generator,
                  lam: float = 1.0) -> float:
    """Draw latent ``i`` from its full conditional; mutates and returns the new value."""
    upper, rank = _exact_arrays(data)
    latents = np.ascontiguousarray(state.latents, dtype=float)
    expo = data.exposure(latents)
    mass = new_cluster_mass(data, lam, state.c, state.beta)
    u = rng.random(2)
    if _latent_step(i, latents, expo, upper, rank, data.xs, data.xi, float(lam), float(state.beta),
                    mass, u[0], u[1]) < 0:
        raise FloatingPointError("full conditional of the latent has zero total mass")
    state.latents = latents
    return float(latents[i])


def g0_density(y, upper: float, data: SurvivalData, lam: float, beta: float):
    """Unnormalised continuous part of the latent full conditional, zero outside ``[0, upper)``."""
    y = np.asarray(y, dtype=float)
    dens = np.exp(-lam * y) / (data.exposure(y) + 1.0 / beta)
    return np.where((y >= 0) & (y < upper), dens, 0.0)


def sample_G0(upper: float, data: SurvivalData, lam: float, beta: float, rng: np.random.Generator,
              size: int | None = None):
    """Draws from the continuous part of the latent full conditional on ``[0, upper)``."""
    us = rng.random(1 if size is None else size)
    out = np.array([_g0_draw(float(upper), data.xs, data.xi, float(lam), float(beta), u) for u in us])
    return float(out[0]) if size is None else out


# ------------------------------------------------------------- hyperparameters

def slice_sample(logpdf: Callable[[float], float], x0: float, rng: np.random.Generator,
                 width: float = 1.0, max_steps: int = 50) -> float:
    """One univariate slice-sampling move (stepping out, then shrinkage)."""
    f0 = logpdf(x0)
    if not np.isfinite(f0):
        raise FloatingPointError(f"log density is not finite at the current point {x0}")
    level = f0 + math.log(rng.random())
    left = x0 - width * rng.random()
    right = left + width
    j = int(math.floor(max_steps * rng.random()))
    k = max_steps - 1 - j
    while j > 0 and logpdf(left) > level:
        left -= width
        j -= 1
    while k > 0 and logpdf(right) > level:
        right += width
        k -= 1
    while True:
        x1 = left + (right - left) * rng.random()
        if logpdf(x1) > level:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1


def _gamma_logpdf(x, shape, rate):
    return (shape - 1.0) * math.log(x) - rate * x


def c_log_conditional(c: float, k: int, intensity: float, prior: PriorSpec) -> float:
    """Log full conditional of ``c`` up to a constant: ``k log c - c R + log prior``."""
    return k * math.log(c) - c * intensity + _gamma_logpdf(c, prior.c_shape, prior.c_rate)


def draw_c(k: int, intensity: float, prior: PriorSpec, rng: np.random.Generator, current: float = 1.0,
           use_slice: bool = False) -> float:
    """Gamma(k + shape, R + rate) draw; ``use_slice`` takes a slice move on ``log c`` instead."""
    rate = intensity + prior.c_rate
    if rate > 0 and not use_slice:
        return float(rng.gamma(k + prior.c_shape, 1.0 / rate))
    lp = lambda u: c_log_conditional(math.exp(u), k, intensity, prior) + u
    return math.exp(slice_sample(lp, math.log(current), rng))


def update_c(state: GibbsState, data: SurvivalData, rng: np.random.Generator, prior: PriorSpec,
             use_slice: bool = False) -> float:
    """Draw ``c`` given the number of clusters and the log cumulative intensity at the current beta."""
    intensity = log_cumulative_intensity(data, prior.lam, state.beta)
    if not np.isfinite(intensity):
        raise FloatingPointError("non-finite log cumulative intensity in the c update")
    state.c = draw_c(state.k, intensity, prior, rng, state.c, use_slice)
    return state.c


def beta_log_conditional(beta: float, state: GibbsState, data: SurvivalData, prior: PriorSpec,
                         expo=None, sizes=None) -> float:
    """Log full conditional of ``beta`` up to a constant."""
    if expo is None:
        cl = state.clusters
        expo, sizes = data.exposure(cl.locations), cl.exact_sizes
    jumps = float(np.dot(sizes, np.log(expo + 1.0 / beta)))
    return (_gamma_logpdf(beta, prior.beta_shape, prior.beta_rate)
            - state.c * log_cumulative_intensity(data, prior.lam, beta) - jumps)


def beta_slice_step(loglik: Callable[[float], float], beta: float, prior: PriorSpec,
                    rng: np.random.Generator) -> float:
    """Slice move on ``log beta`` (width 1, at most 50 step-outs) for prior times ``exp(loglik)``."""
    def lp(u):
        b = math.exp(u)
        if not 0.0 < b < np.inf:
            return -np.inf
        return _gamma_logpdf(b, prior.beta_shape, prior.beta_rate) + loglik(b) + u

    return math.exp(slice_sample(lp, math.log(beta), rng))


def update_beta(state: GibbsState, data: SurvivalData, rng: np.random.Generator, prior: PriorSpec) -> float:
    cl = state.clusters
    expo, sizes = data.exposure(cl.locations), cl.exact_sizes.astype(float)
    prior_only = _gamma_logpdf

    def loglik(b):
        if prior.lam / b / (data.n + 1) < EI_GUARD:
            return -np.inf
        return (beta_log_conditional(b, state, data, prior, expo, sizes)
                - prior_only(b, prior.beta_shape, prior.beta_rate))

    state.beta = beta_slice_step(loglik, state.beta, prior, rng)
    return state.beta


# ------------------------------------------------------------- the chain

def run_chain(data: SurvivalData, config: GibbsConfig, progress: Callable[[int], None] | None = None
              ) -> MomentEstimates:
    """Run the sampler and average the conditional moments after burn-in."""
    if data.n_exact == 0:
        raise ValueError("at least one exact observation is required")
    rng = np.random.default_rng(config.seed)
    prior = config.prior
    state = GibbsState.initial(data, rng)
    upper, rank = _exact_arrays(data)
    grid = config.grid
    kept = config.l_max - config.l_min
    acc = np.zeros((grid.size, config.order))
    trace1 = np.empty((kept, grid.size))
    params = np.empty((config.l_max, 4))
    expo = data.exposure(state.latents)
    shift = EI_GUARD * max(config.M, data.max_time)
    lam = float(config.lam)

    for l in range(1, config.l_max + 1):
        mass = new_cluster_mass(data, lam, state.c, state.beta)
        bad = _sweep(state.latents, expo, upper, rank, data.xs, data.xi, lam, float(state.beta),
                     mass, rng.random(2 * upper.size))
        if bad >= 0:
            raise FloatingPointError(f"latent {bad} has a zero-mass full conditional at iteration {l}")
        update_c(state, data, rng, prior)
        update_beta(state, data, rng, prior)
        loc, inv = np.unique(state.latents, return_inverse=True)
        sizes = np.bincount(inv).astype(float)
        params[l - 1] = (l, state.c, state.beta, loc.size)
        if config.debug:
            ClusterState(loc, sizes.astype(np.int64), sizes.astype(np.int64)).check(data, state.latents)
        if l > config.l_min:
            table = np.exp(log_moment_table(data.xs, data.xi, lam, state.c, state.beta, loc, sizes,
                                            grid, config.order, shift))
            acc += table
            trace1[l - config.l_min - 1] = table[:, 0]
        if progress is not None:
            progress(l)
    return MomentEstimates(grid, acc / kept, trace1, params)


def write_trace(path, estimates: MomentEstimates) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["l", "c", "beta", "k"])
        for l, c, b, k in estimates.params_trace:
            w.writerow([int(l), repr(float(c)), repr(float(b)), int(k)])
