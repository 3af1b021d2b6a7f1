"""Exponential integral Ei and its exponentially scaled form.

Both are compiled with numba because the moment kernel calls them in
tight loops; the array wrappers at the bottom are the public entry points.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

EULER_GAMMA = 0.5772156649015329
# positive zero of Ei, split into a double-double pair
_ROOT_HI = 0.3725074107813666
_ROOT_LO = 1.3140183414386028e-17
_EPS = 1e-17
_ASYMPTOTIC_FROM = 50.0


@njit(cache=True)
def _series(x):
    # gamma + log|x| + sum x^k / (k k!)
    term = 1.0
    total = 0.0
    k = 0
    while True:
        k += 1
        term *= x / k
        inc = term / k
        total += inc
        if abs(inc) <= _EPS * abs(total) or k > 500:
            break
    return EULER_GAMMA + math.log(abs(x)) + total


@njit(cache=True)
def _series_about_root(x):
    # Ei(x) = log(x/x0) + sum (x^k - x0^k) / (k k!), with x^k - x0^k factored
    # through dx so that nothing cancels near the zero.
    dx = (x - _ROOT_HI) - _ROOT_LO
    p = 1.0            # (x^k - x0^k) / dx
    x0pow = 1.0        # x0^(k-1)
    fact = 1.0
    total = 0.0
    k = 1
    while True:
        fact *= k
        inc = p / (k * fact)
        total += inc
        if abs(inc) <= _EPS * abs(total) or k > 200:
            break
        x0pow *= _ROOT_HI
        p = x * p + x0pow
        k += 1
    return math.log1p(dx / _ROOT_HI) + dx * total


@njit(cache=True)
def _asymptotic_scaled(x):
    # exp(-x) Ei(x) ~ (1/x) sum k! / x^k
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * k / x
        if nxt > term or nxt < _EPS * total:
            break
        term = nxt
        total += term
    return total / x


@njit(cache=True)
def _e1_scaled_cf(y):
    # exp(y) E1(y) by modified Lentz, valid for y > 1
    tiny = 1e-300
    b = y + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


@njit(cache=True)
def ei_scalar(x):
    if x == 0.0:
        return -np.inf
    if x < 0.0:
        if x >= -1.0:
            return _series(x)
        return -math.exp(x) * _e1_scaled_cf(-x)
    if x < 0.2:
        return _series(x)
    if x < 1.5:
        return _series_about_root(x)
    if x <= _ASYMPTOTIC_FROM:
        return _series(x)
    return math.exp(x) * _asymptotic_scaled(x)


@njit(cache=True)
def eie_scalar(x):
    """exp(-x) * Ei(x) without overflow for large positive x."""
    if x < -1.0:
        return -_e1_scaled_cf(-x)
    if x <= _ASYMPTOTIC_FROM:
        return math.exp(-x) * ei_scalar(x)
    return _asymptotic_scaled(x)


@njit(cache=True)
def _map(fn_id, xs, out):
    for k in range(xs.size):
        out[k] = ei_scalar(xs[k]) if fn_id == 0 else eie_scalar(xs[k])


def _apply(fn_id, z):
    arr = np.asarray(z, dtype=float)
    if np.any(arr == 0.0):
        raise ValueError("Ei has a logarithmic singularity at 0")
    flat = np.ascontiguousarray(arr).ravel()
    out = np.empty_like(flat)
    _map(fn_id, flat, out)
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def ei(z):
    """Principal-value exponential integral ``Ei(z) = -int_{-z}^inf e^-u / u du``.

    Accepts a scalar or an array of nonzero reals.
    """
    return _apply(0, z)


def ei_scaled(z):
    """``exp(-z) * Ei(z)``, finite for arbitrarily large positive ``z``."""
    return _apply(1, z)


# ------------------------------------------------------------------ fast path
# Piecewise polynomial interpolants of exp(-x) Ei(x) on geometrically growing
# intervals, fitted once at import from the series above.  Positive arguments
# only; this is what the moment kernel evaluates millions of times per chain.

_FAST_LO = 0.02
_FAST_HI = 250.0
_FAST_RATIO = 1.25
_FAST_DEG = 12


def _fit_pieces():
    n_pieces = int(np.ceil(np.log(_FAST_HI / _FAST_LO) / np.log(_FAST_RATIO)))
    edges = _FAST_LO * _FAST_RATIO ** np.arange(n_pieces + 1)
    coef = np.empty((n_pieces, _FAST_DEG + 1))
    for k in range(n_pieces):
        lo, hi = edges[k], edges[k + 1]
        fn = lambda u, lo=lo, hi=hi: ei_scaled(0.5 * (hi - lo) * u + 0.5 * (hi + lo))
        cheb = np.polynomial.chebyshev.chebinterpolate(fn, _FAST_DEG)
        coef[k] = np.polynomial.chebyshev.cheb2poly(cheb)
    return edges, coef


_EDGES, _COEF = _fit_pieces()
_FAST_TOP = float(_EDGES[-1])
_INV_LOG_RATIO = 1.0 / math.log(_FAST_RATIO)


@njit(cache=True, fastmath=True)
def eie_fast(x):
    """``exp(-x) Ei(x)`` for ``x > 0``; absolute error ~1e-15 relative to the local scale."""
    if x < _FAST_LO:
        return math.exp(-x) * _series(x)
    if x >= _FAST_TOP:
        return _asymptotic_scaled(x)
    k = int(math.log(x * (1.0 / _FAST_LO)) * _INV_LOG_RATIO)
    if k >= _COEF.shape[0]:
        k = _COEF.shape[0] - 1
    lo = _EDGES[k]
    hi = _EDGES[k + 1]
    u = (2.0 * x - lo - hi) / (hi - lo)
    acc = _COEF[k, _FAST_DEG]
    for j in range(_FAST_DEG - 1, -1, -1):
        acc = acc * u + _COEF[k, j]
    return acc
