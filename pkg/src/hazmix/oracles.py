"""Quadrature cross-checks for the closed-form conditional moments.

Neither function touches the exponential integral: one integrates the
log-form integrand piecewise over the observation intervals, the other goes
back to the Levy-intensity double integral with raw quadrature in the jump
variable ``s`` as well.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .moments import ClusterState, KernelSpec, PriorSpec, SurvivalData

QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-11, limit=200)


class QuadratureError(RuntimeError):
    pass


def _quad(fn, lo, hi, **extra):
    opts = {**QUAD_OPTS, **extra}
    val, err = integrate.quad(fn, lo, hi, **opts)
    if not np.isfinite(val) or err > 1e-7 * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature on [{lo}, {hi}] did not converge (err={err:.2e})")
    return val


def _jump_log_factor(data, kernel, clusters, t, r, jump_factor):
    if clusters is None:
        return 0.0
    out = 0.0
    for y, m in zip(clusters.locations, clusters.exact_sizes):
        if m > 0:
            out += jump_factor(float(y), int(m))
    return out


def conditional_moment_oracle_log(data: SurvivalData, kernel: KernelSpec, prior: PriorSpec,
                                  clusters: ClusterState | None, t: float, r: float) -> float:
    """Moment via 1-D quadrature of ``log(1 + r (t-y)/(xi_i - i y + 1/beta))`` on each interval."""
    lam, beta, c = prior.lam, kernel.beta, prior.c
    xs, xi = data.xs, data.xi
    total = 0.0
    for i in range(data.n + 1):
        hi, lo = min(xs[i], t), min(xs[i + 1], t)
        if hi <= lo:
            continue
        a = xi[i] + 1.0 / beta
        total += _quad(lambda y: math.log1p(r * (t - y) / (a - i * y)) * lam * math.exp(-lam * y), lo, hi)

    def jump(y, m):
        den = float(data.exposure(y)) + 1.0 / beta
        return -m * math.log1p(r * max(t - y, 0.0) / den)

    return math.exp(-c * total + _jump_log_factor(data, kernel, clusters, t, r, jump))


def levy_inner(a: float, b: float) -> float:
    """``int_0^inf (1 - e^{-a s}) e^{-b s} e^{-s}/s ds`` by quadrature (equals ``log(1 + a/(1+b))``)."""
    if a == 0.0:
        return 0.0
    return _quad(lambda s: -math.expm1(-a * s) * math.exp(-(b + 1.0) * s) / s if s > 0 else a, 0.0, np.inf)


def conditional_moment_oracle_levy(data: SurvivalData, kernel: KernelSpec, prior: PriorSpec,
                                   clusters: ClusterState | None, t: float, r: float) -> float:
    """Moment from the general Levy-intensity representation, all integrals numerical.

    Uses ``rho(s) = e^{-s}/s``, ``P_0 = Exp(lam)`` and the cumulative kernels
    ``K_t(y) = beta (t-y)^+`` and ``K(y) = beta sum_l (T_l - y)^+``.
    """
    lam, beta, c = prior.lam, kernel.beta, prior.c
    if r == 0:
        return 1.0

    def outer(y):
        a = r * beta * max(t - y, 0.0)
        b = beta * float(data.exposure(y))
        return levy_inner(a, b) * lam * math.exp(-lam * y)

    pts = sorted({float(x) for x in data.times if 0 < x < t})
    edges = [0.0] + pts + [t]
    total = sum(_quad(outer, lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo)

    def jump(y, m):
        kx = beta * float(data.exposure(y))
        kt = beta * max(t - y, 0.0)
        # ratio of int s^m e^{-s (r K_t + K)} rho(s) ds to the same with r = 0;
        # rescale s so both integrands peak near s ~ m.
        scale = m / (kx + 1.0)
        num = _quad(lambda s: s ** (m - 1) * math.exp(-s * scale * (r * kt + kx + 1.0)), 0.0, np.inf)
        den = _quad(lambda s: s ** (m - 1) * math.exp(-s * scale * (kx + 1.0)), 0.0, np.inf)
        return math.log(num) - math.log(den)

    return math.exp(-c * total + _jump_log_factor(data, kernel, clusters, t, r, jump))


def _literal_intensity_terms(data: SurvivalData, lam: float, beta: float) -> float:
    """Sum over sorted observations of the Ei and power terms shared by the c and beta conditionals.

    Written term by term with the plain (unscaled) exponential integral, so it
    is only usable for small, moderate data.
    """
    from .special import ei

    xs, xi = data.xs, data.xi
    total = 0.0
    for i in range(1, data.n + 1):
        kappa = (xi[i] + 1.0 / beta) / i
        f = lambda x: lam * (kappa - x)
        total += math.exp(-f(0.0)) * (float(ei(f(xs[i]))) - float(ei(f(xs[i + 1]))))
        total += math.exp(-lam * xs[i + 1]) * math.log(xi[i] + 1.0 / beta - i * xs[i + 1])
        total -= math.exp(-lam * xs[i]) * math.log(xi[i] + 1.0 / beta - i * xs[i])
    return total


def _beta_power(data: SurvivalData, lam: float, beta: float, correct_tail: bool) -> float:
    # the printed form carries beta^{-c} over the whole half-line; beyond the
    # largest observation the exposure is zero, so the exact exponent is
    # -c (1 - exp(-lam X_1))
    frac = 1.0 - math.exp(-lam * data.xs[1]) if correct_tail else 1.0
    return frac * math.log(beta)


def c_log_conditional_literal(c: float, k: int, data: SurvivalData, beta: float, prior: PriorSpec,
                              correct_tail: bool = False) -> float:
    """Log full conditional of ``c`` (unnormalised) assembled term by term.

    With ``correct_tail=False`` this is the textbook expression verbatim;
    ``True`` adds the missing contribution of ``(X_1, inf)``.
    """
    log_prior = (prior.c_shape - 1.0) * math.log(c) - prior.c_rate * c
    return (log_prior + k * math.log(c) - c * _beta_power(data, prior.lam, beta, correct_tail)
            - c * _literal_intensity_terms(data, prior.lam, beta))


def beta_log_conditional_literal(beta: float, c: float, data: SurvivalData, clusters: ClusterState,
                                 prior: PriorSpec, correct_tail: bool = False) -> float:
    """Log full conditional of ``beta`` (unnormalised) assembled term by term."""
    log_prior = (prior.beta_shape - 1.0) * math.log(beta) - prior.beta_rate * beta
    jumps = sum(m * math.log(float(data.exposure(y)) + 1.0 / beta)
                for y, m in zip(clusters.locations, clusters.exact_sizes))
    return (log_prior - c * _beta_power(data, prior.lam, beta, correct_tail)
            - c * _literal_intensity_terms(data, prior.lam, beta) - jumps)


def latent_weights_oracle(i: int, latents, data: SurvivalData, lam: float, c: float, beta: float):
    """``(p_new, values, p_atoms)`` for latent ``i``, with the new-cluster mass by quadrature."""
    upper = float(data.times[data.exact_index][i])
    g0 = lambda y: math.exp(-lam * y) / (float(data.exposure(y)) + 1.0 / beta)
    pts = sorted({float(x) for x in data.times if x < upper})
    edges = [0.0] + pts + [upper]
    p0 = c * lam * sum(_quad(g0, lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo)
    others = np.delete(np.asarray(latents, dtype=float), i)
    values, counts = np.unique(others, return_counts=True)
    w = np.array([m / (float(data.exposure(v)) + 1.0 / beta) if v < upper else 0.0
                  for v, m in zip(values, counts)])
    total = p0 + w.sum()
    return p0 / total, values, w / total
