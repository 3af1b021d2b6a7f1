"""Posterior functionals of the survival curve: t-by-t summaries, median survival time, Kaplan-Meier."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np

from .gibbs import MomentEstimates
from .polyapprox import (DEFAULT_MAX_COEFF, DegenerateMoments, IllConditionedBasis, ApproxDensity,
                         reconstruct)
from .sampler import (DEFAULT_SAMPLES, WeightedSample, hpd_interval, importance_sample, mode_estimate,
                      weighted_cdf_at, weighted_quantile)

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["t", "mean", "median", "mode", "hpd_lo", "hpd_hi", "marg_lo", "marg_hi", "c_i"]


# ------------------------------------------------------------- median survival time

def isotonic_cdf(c) -> np.ndarray:
    """Clip to [0, 1] and force nondecreasing with a running maximum."""
    c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
    return np.maximum.accumulate(c)


@dataclass(frozen=True)
class MedianSurvival:
    m_hat: float
    lo: float
    hi: float
    grid: np.ndarray
    c: np.ndarray  # after isotonic correction

    def to_dict(self) -> dict:
        return {"m_hat": float(self.m_hat), "interval": [float(self.lo), float(self.hi)],
                "level": 0.95, "t": [float(t) for t in self.grid], "c": [float(v) for v in self.c]}


def _cdf_quantile(c: np.ndarray, grid: np.ndarray, p: float, beyond: float) -> float:
    hit = np.flatnonzero(c >= p - 1e-12)
    return float(grid[hit[0]]) if hit.size else float(beyond)


def median_survival_time(c, grid, level: float = 0.95) -> MedianSurvival:
    """``m_hat = sum_i t_i (c_{i+1} - c_i)`` with ``c_{q+1} = 1``, plus an equal-tailed interval.

    The interval reads ``(c_i)`` as the CDF of ``m`` at ``t_i``; the mass
    ``1 - c_q`` left over sits one grid step beyond the last point.
    """
    grid = np.asarray(grid, dtype=float)
    c = isotonic_cdf(c)
    if grid.size < 2 or c.shape != grid.shape:
        raise ValueError("need at least two grid points and one c per point")
    nxt = np.append(c[1:], 1.0)
    m_hat = float(np.dot(grid, nxt - c))
    beyond = grid[-1] + (grid[-1] - grid[-2])
    a = (1.0 - level) / 2.0
    return MedianSurvival(m_hat, _cdf_quantile(c, grid, a, beyond), _cdf_quantile(c, grid, 1.0 - a, beyond),
                          grid, c)


def median_survival_riemann(c, M: float) -> float:
    """The companion left-Riemann form ``M/(q-1) * sum (1 - c_i)``."""
    c = isotonic_cdf(c)
    return float(M / (c.size - 1) * np.sum(1.0 - c))


# ------------------------------------------------------------- t-by-t summaries

@dataclass(frozen=True)
class PointSummary:
    mean: float
    median: float
    mode: float
    hpd: tuple
    hpd_contiguous: bool
    c: float
    order: int  # moments actually used; 0 for the point-mass fallback


def reconstruct_guarded(moments, order: int, max_coeff: float = DEFAULT_MAX_COEFF):
    """Beta-matched reconstruction, lowering the order until the coefficient guard passes.

    Returns ``None`` when the first two moments describe a point mass.
    """
    for n in range(order, 1, -1):
        try:
            return reconstruct(moments, n, max_coeff=max_coeff)
        except DegenerateMoments:
            return None
        except IllConditionedBasis:
            continue
    return None


def summarise_density(d: ApproxDensity | None, mean: float, n_samples: int, rng: np.random.Generator,
                      level: float = 0.95) -> tuple[PointSummary, WeightedSample]:
    if d is None:
        ws = WeightedSample.point_mass(mean)
        return PointSummary(mean, mean, mean, (mean, mean), True, weighted_cdf_at(ws, 0.5), 0), ws
    ws = importance_sample(d, n_samples, rng)
    hpd = hpd_interval(d, level)
    return PointSummary(mean, weighted_quantile(ws, 0.5), mode_estimate(d), (hpd.lo, hpd.hi), hpd.contiguous,
                        weighted_cdf_at(ws, 0.5), d.basis.order), ws


def marginal_intervals(trace, level: float = 0.95) -> np.ndarray:
    """Per-column empirical quantiles of the conditional-mean trace; shape ``(q, 2)``."""
    trace = np.asarray(trace, dtype=float)
    if trace.ndim != 2 or trace.shape[0] == 0:
        raise ValueError("trace must be a non-empty (iterations, q) array")
    a = (1.0 - level) / 2.0
    return np.quantile(trace, [a, 1.0 - a], axis=0).T


@dataclass
class SurvivalSummary:
    grid: np.ndarray
    mean: np.ndarray
    median: np.ndarray
    mode: np.ndarray
    hpd: np.ndarray       # (q, 2)
    marginal: np.ndarray  # (q, 2)
    c: np.ndarray
    orders: np.ndarray
    contiguous: np.ndarray

    def median_survival(self, level: float = 0.95) -> MedianSurvival:
        return median_survival_time(self.c, self.grid, level)

    def rows(self):
        for g, t in enumerate(self.grid):
            yield [t, self.mean[g], self.median[g], self.mode[g], self.hpd[g, 0], self.hpd[g, 1],
                   self.marginal[g, 0], self.marginal[g, 1], self.c[g]]


def t_by_t_summaries(est: MomentEstimates, n_samples: int = DEFAULT_SAMPLES, seed: int = 0,
                     order: int | None = None, level: float = 0.95) -> SurvivalSummary:
    """Reconstruct and summarise the posterior of ``S(t)`` at every grid point.

    Each grid index draws from its own stream seeded by ``(seed, index)``.
    """
    order = est.order if order is None else order
    q = est.grid.size
    out = {k: np.empty(q) for k in ("mean", "median", "mode", "c")}
    hpd = np.empty((q, 2))
    orders = np.empty(q, dtype=np.int64)
    contiguous = np.empty(q, dtype=bool)
    for g in range(q):
        mu = est.moment_sequence(g)[:order + 1]
        d = reconstruct_guarded(mu, order)
        if d is not None and d.basis.order < order:
            log.info("t=%g: order lowered to %d by the coefficient guard", est.grid[g], d.basis.order)
        rng = np.random.default_rng(np.random.SeedSequence([seed, g]))
        s, _ = summarise_density(d, float(mu[1]), n_samples, rng, level)
        out["mean"][g], out["median"][g], out["mode"][g], out["c"][g] = s.mean, s.median, s.mode, s.c
        hpd[g] = s.hpd
        orders[g] = s.order
        contiguous[g] = s.hpd_contiguous
    return SurvivalSummary(est.grid.copy(), out["mean"], out["median"], out["mode"], hpd,
                           marginal_intervals(est.first_moment_trace, level), out["c"], orders, contiguous)


# ------------------------------------------------------------- Kaplan-Meier

@dataclass(frozen=True)
class KaplanMeier:
    times: np.ndarray     # distinct event times
    survival: np.ndarray  # S just after each of them

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.times, t, side="right")
        return np.where(k == 0, 1.0, self.survival[np.maximum(k - 1, 0)]) if self.times.size else np.ones_like(t)

    def median(self) -> float:
        hit = np.flatnonzero(self.survival <= 0.5)
        return float(self.times[hit[0]]) if hit.size else float("nan")


def kaplan_meier(times, events) -> KaplanMeier:
    """Product-limit estimator; censored times count as at risk at their own event times."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(events).astype(bool)
    if t.size == 0:
        raise ValueError("empty dataset")
    ev = np.unique(t[e])
    surv = np.empty(ev.size)
    s = 1.0
    for j, u in enumerate(ev):
        at_risk = np.sum(t >= u)
        deaths = np.sum((t == u) & e)
        s *= 1.0 - deaths / at_risk
        surv[j] = s
    return KaplanMeier(ev, surv)


# ------------------------------------------------------------- writers

def _fmt(x) -> str:
    return repr(float(x))


def write_summary_csv(path, summary: SurvivalSummary) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in summary.rows():
            w.writerow([_fmt(v) for v in row])


def write_median_json(path, ms: MedianSurvival) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(ms.to_dict(), fh, indent=2)
        fh.write("\n")


def write_moments_csv(path, est: MomentEstimates) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"mu_{r}" for r in range(1, est.order + 1)])
        for t, row in zip(est.grid, est.moments):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def write_km_csv(path, km: KaplanMeier) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "survival"])
        w.writerow([_fmt(0.0), _fmt(1.0)])
        for t, s in zip(km.times, km.survival):
            w.writerow([_fmt(t), _fmt(s)])
