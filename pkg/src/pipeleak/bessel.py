"""Modified Bessel functions of the first kind, orders 0 and 1, for real z >= 0.

Ascending series below ``SERIES_LIMIT``; Hankel asymptotic expansion above it.
``i1_over_z`` gives ``I1(z)/z`` without the 0/0 at the origin, which the gain
kernels need.
"""
from __future__ import annotations

import math

import numpy as np

SERIES_LIMIT = 15.0
SERIES_TERMS = 40
ASYMPTOTIC_TERMS = 30


def _series(z, order):
    # sum_k t^k / (k! (k+order)!), t = z^2 / 4
    t = 0.25 * z * z
    term = np.full_like(z, 1.0 / math.factorial(order))
    total = term.copy()
    for k in range(SERIES_TERMS - 1):
        term = term * t / ((k + 1) * (k + 1 + order))
        total += term
    return total


def _asymptotic(z, order):
    mu = 4.0 * order * order
    term = np.ones_like(z)
    total = term.copy()
    last = np.abs(term)
    for k in range(1, ASYMPTOTIC_TERMS):
        term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        # stop adding once the divergent tail starts growing
        grow = np.abs(term) > last
        term = np.where(grow, 0.0, term)
        total += term
        last = np.where(grow, 0.0, np.abs(term))
    return np.exp(z) / np.sqrt(2.0 * np.pi * z) * total


def _evaluate(z, series, asymptotic):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("argument must be non-negative")
    zf = np.atleast_1d(z)
    out = np.empty_like(zf)
    small = zf <= SERIES_LIMIT
    if small.any():
        out[small] = series(zf[small])
    if (~small).any():
        out[~small] = asymptotic(zf[~small])
    return out.reshape(z.shape) if z.ndim else float(out[0])


def bessel_i0(z):
    return _evaluate(z, lambda s: _series(s, 0), lambda s: _asymptotic(s, 0))


def bessel_i1(z):
    return _evaluate(z, lambda s: 0.5 * s * _series(s, 1), lambda s: _asymptotic(s, 1))


def i1_over_z(z):
    """``I1(z) / z``, equal to 1/2 at ``z = 0``."""
    return _evaluate(z, lambda s: 0.5 * _series(s, 1), lambda s: _asymptotic(s, 1) / s)
