"""Density reconstruction on [0, 1] from raw moments with shifted Jacobi polynomials.

The orthonormal basis ``G_0, ..., G_N`` for the weight
``w(s) = s**(a-1) * (1-s)**(b-1)`` is built from the closed-form
hypergeometric expansion of the Jacobi polynomials, in mpmath extended
precision.  Monomial coefficients grow quickly with ``N`` and alternate in
sign, so the projection coefficients ``lambda_i`` are also formed in extended
precision; pointwise evaluation then uses the (stable) three-term recurrence
in double precision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import mpmath as mp
import numpy as np
from scipy import special

WORKING_DPS = 60
DEFAULT_ORDER = 10
DEFAULT_MAX_COEFF = 1e12
DEGENERATE_VARIANCE = 1e-12


class IllConditionedBasis(ValueError):
    """Raised when the requested order exceeds what the coefficient guard allows."""


class DegenerateMoments(ValueError):
    """Raised when the first two moments describe (numerically) a point mass."""


@dataclass(frozen=True)
class WeightParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0) or not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError(f"weight parameters must be positive, got a={self.a}, b={self.b}")

    def weight(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return s ** (self.a - 1.0) * (1.0 - s) ** (self.b - 1.0)

    @property
    def log_beta(self) -> float:
        return float(special.betaln(self.a, self.b))

    @classmethod
    def beta_matched(cls, m1: float, m2: float) -> "WeightParams":
        """Beta shapes whose first two raw moments are ``m1`` and ``m2``."""
        var = m2 - m1 * m1
        if var < DEGENERATE_VARIANCE:
            raise DegenerateMoments(f"variance {var:.3g} too small for a Beta match")
        if not (0.0 < m1 < 1.0) or m1 - m2 <= 0.0:
            raise ValueError(f"moments ({m1}, {m2}) are not those of a [0,1] variable")
        k = (m1 - m2) / var
        return cls(m1 * k, (1.0 - m1) * k)


def _norm_sq(n: int, a, b):
    if n == 0:
        return mp.beta(a, b)
    return mp.exp(mp.loggamma(n + a) + mp.loggamma(n + b) - mp.loggamma(n + a + b - 1)
                  - mp.loggamma(n + 1)) / (2 * n + a + b - 1)


@dataclass(frozen=True)
class JacobiBasis:
    """Orthonormal polynomials ``G_i(s) = sum_r G[i, r] s**r`` under ``w_{a,b}``."""

    params: WeightParams
    order: int
    exact: tuple = field(repr=False)      # mpf rows, exact[i][r]
    norms: np.ndarray = field(repr=False)  # sqrt of <P_i, P_i> for the unnormalised Jacobi P_i

    @property
    def coeffs(self) -> np.ndarray:
        """Lower-triangular ``(N+1, N+1)`` float table of ``G_{i,r}``."""
        table = np.zeros((self.order + 1, self.order + 1))
        for i, row in enumerate(self.exact):
            table[i, : i + 1] = [float(v) for v in row]
        return table

    def evaluate(self, s) -> np.ndarray:
        """Values ``G_i(s)`` for ``i = 0..N``; shape ``(N+1,) + s.shape``."""
        s = np.asarray(s, dtype=float)
        # classical P_n^{(alpha, beta)}(2s - 1) with alpha = b - 1, beta = a - 1
        al, be = self.params.b - 1.0, self.params.a - 1.0
        x = 2.0 * s - 1.0
        out = np.empty((self.order + 1,) + s.shape)
        out[0] = 1.0
        if self.order >= 1:
            out[1] = (al + 1.0) + (al + be + 2.0) * (x - 1.0) / 2.0
        for n in range(2, self.order + 1):
            c = 2.0 * n + al + be
            lead = (c - 1.0) * (c * (c - 2.0) * x + al * al - be * be)
            back = 2.0 * (n + al - 1.0) * (n + be - 1.0) * c
            out[n] = (lead * out[n - 1] - back * out[n - 2]) / (2.0 * n * (n + al + be) * (c - 2.0))
        out /= self.norms.reshape((-1,) + (1,) * s.ndim)
        return out


def build_basis(params: WeightParams, order: int, max_coeff: float = DEFAULT_MAX_COEFF) -> JacobiBasis:
    """Orthonormal shifted Jacobi basis of degree ``order`` for ``params``.

    Raises :class:`IllConditionedBasis` if any coefficient of ``G_N``, scaled to
    the normalised weight ``w / B(a, b)``, exceeds ``max_coeff`` in magnitude.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    with mp.workdps(WORKING_DPS):
        a, b = mp.mpf(params.a), mp.mpf(params.b)
        rows = []
        norms = []
        for n in range(order + 1):
            nrm = mp.sqrt(_norm_sq(n, a, b))
            # P_n(2s-1) = (-1)^n (a)_n/n! sum_r (-1)^r C(n,r) (n+a+b-1)_r/(a)_r s^r
            lead = (-1) ** n * mp.rf(a, n) / mp.factorial(n) / nrm
            row = []
            term = lead
            for r in range(n + 1):
                row.append(term)
                # ratio of consecutive hypergeometric terms
                term = term * (-(n - r)) * (n + a + b - 1 + r) / ((a + r) * (r + 1))
            rows.append(tuple(row))
            norms.append(float(nrm))
        # measured against the Beta *probability* weight so the check does not
        # depend on the arbitrary normalisation of w
        biggest = max(abs(v) for v in rows[-1]) * mp.sqrt(mp.beta(a, b))
        if biggest > max_coeff:
            raise IllConditionedBasis(
                f"order {order} with (a={params.a:.4g}, b={params.b:.4g}) gives coefficients "
                f"up to {mp.nstr(biggest, 3)} > {max_coeff:.3g}")
    return JacobiBasis(params, order, tuple(rows), np.array(norms))


@dataclass(frozen=True)
class ApproxDensity:
    """Truncated expansion ``f_N(s) = w(s) sum_i lambda_i G_i(s)``."""

    basis: JacobiBasis
    lam: np.ndarray

    @property
    def params(self) -> WeightParams:
        return self.basis.params

    def polynomial(self, s) -> np.ndarray:
        """``sum_i lambda_i G_i(s)``, i.e. ``f_N / w``."""
        return np.tensordot(self.lam, self.basis.evaluate(s), axes=1)

    def fN(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(invalid="ignore"):
            return self.params.weight(s) * self.polynomial(s)

    def piN_unnorm(self, s):
        return np.maximum(self.fN(s), 0.0)


def _as_moments(moments, needed: int):
    mu = list(moments)
    if len(mu) < needed:
        raise ValueError(f"need at least {needed} moments (mu_0..mu_{needed - 1}), got {len(mu)}")
    return mu[:needed]


def coefficients_from_moments(basis: JacobiBasis, moments: Sequence) -> ApproxDensity:
    """Projection coefficients ``lambda_i = sum_{r<=i} G_{i,r} mu_r``.

    ``moments`` starts at ``mu_0`` (normally 1).  Entries may be floats or
    mpmath numbers; floats are taken as exact binary values.
    """
    mu = _as_moments(moments, basis.order + 1)
    with mp.workdps(WORKING_DPS):
        mu = [mp.mpf(m) for m in mu]
        lam = [mp.fsum(g * m for g, m in zip(row, mu)) for row in basis.exact]
    return ApproxDensity(basis, np.array([float(v) for v in lam]))


def _check_unit(s):
    arr = np.asarray(s, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)) or np.any(np.isnan(arr)):
        raise ValueError("evaluation points must lie in [0, 1]")
    return arr


def eval_fN(d: ApproxDensity, s):
    """Truncated expansion at ``s``; may be negative."""
    out = d.fN(_check_unit(s))
    return float(out) if np.ndim(out) == 0 else out


def eval_piN_unnorm(d: ApproxDensity, s):
    """Positive part of :func:`eval_fN` (unnormalised)."""
    out = d.piN_unnorm(_check_unit(s))
    return float(out) if np.ndim(out) == 0 else out


def reconstruct(moments: Sequence, order: int = DEFAULT_ORDER, params: WeightParams | None = None,
                max_coeff: float = DEFAULT_MAX_COEFF) -> ApproxDensity:
    """Beta-matched weight (unless ``params`` given), basis and coefficients in one go."""
    mu = _as_moments(moments, order + 1)
    if params is None:
        params = WeightParams.beta_matched(float(mu[1]), float(mu[2]))
    return coefficients_from_moments(build_basis(params, order, max_coeff), mu)


def check_moment_sequence(moments: Sequence, tol: float = 1e-12) -> None:
    """Raise if ``moments`` cannot be raw moments of a [0, 1] variable (monotone bound check)."""
    mu = np.asarray([float(m) for m in moments])
    if abs(mu[0] - 1.0) > tol:
        raise ValueError("mu_0 must equal 1")
    if np.any(mu < -tol) or np.any(np.diff(mu) > tol):
        raise ValueError("moments must satisfy 1 = mu_0 >= mu_1 >= ... >= 0")
