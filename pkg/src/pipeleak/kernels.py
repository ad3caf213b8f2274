"""Closed-form backstepping observer gains and their scaled variants.

The radicals ``sqrt((xi + x) / (xi - x)) * I1(r sqrt(xi^2 - x^2))`` are rewritten
as ``r (xi + x) * I1(s) / s`` with ``s = r sqrt(xi^2 - x^2)``, which is smooth
up to and including ``xi = x`` and ``x = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bessel import bessel_i0, i1_over_z
from .hydraulics import DerivedCoefficients
from .riemann import grid_x

MIN_PANELS = 64
_CHUNK = 200_000


@dataclass(frozen=True)
class GainProfile:
    x_nodes: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p1_scaled: np.ndarray
    p2_scaled: np.ndarray
    L: float
    sigma: float
    epsilon: float

    def as_table(self) -> np.ndarray:
        return np.column_stack([self.x_nodes, self.p1, self.p2, self.p1_scaled, self.p2_scaled])


def _bracket(x, xi, sigma, eps, sign):
    """``sigma I0(s) - |sigma| sqrt((xi +/- x)/(xi -/+ x)) I1(s)`` in smooth form."""
    r = abs(sigma) / eps
    s = r * np.sqrt(np.maximum(xi * xi - x * x, 0.0))
    return sigma * bessel_i0(s) - abs(sigma) * r * (xi + sign * x) * i1_over_z(s)


def simpson_weights(panels: int) -> np.ndarray:
    if panels < 2 or panels % 2:
        raise ValueError("Simpson needs an even panel count >= 2")
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def default_panels(n_nodes: int) -> int:
    m = max(MIN_PANELS, 8 * n_nodes)
    return m + (m % 2)


def gain_integrals(x, sigma: float, eps: float, panels: int = MIN_PANELS):
    """The two xi-integrals over ``[x, 1]`` appearing in ``p1`` and ``p2``.

    Returns ``(J1, J2)`` with
    ``J1 = int exp(sigma (xi - x)/eps) B+(x, xi) dxi`` and
    ``J2 = int exp(sigma (xi + x)/eps) B-(x, xi) dxi``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = simpson_weights(panels)
    tau = np.linspace(0.0, 1.0, panels + 1)
    J1 = np.empty_like(x)
    J2 = np.empty_like(x)
    rows = max(1, _CHUNK // (panels + 1))
    for lo in range(0, x.size, rows):
        xs = x[lo:lo + rows, None]
        width = 1.0 - xs
        xi = xs + width * tau[None, :]
        b1 = np.exp(sigma * (xi - xs) / eps) * _bracket(xs, xi, sigma, eps, +1)
        b2 = np.exp(sigma * (xi + xs) / eps) * _bracket(xs, xi, sigma, eps, -1)
        h = width[:, 0] / panels
        J1[lo:lo + rows] = h * (b1 @ w)
        J2[lo:lo + rows] = h * (b2 @ w)
    return J1, J2


def _gains(x, sigma, eps, L, panels):
    if L >= 0:
        raise ValueError("L must be negative")
    if sigma > 0 or eps <= 0:
        raise ValueError("need sigma <= 0 and epsilon > 0")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    J1, J2 = gain_integrals(x, sigma, eps, panels)
    one = np.ones_like(x)
    p1 = -L - 0.5 * np.exp(sigma * (1 - x) / eps) * _bracket(x, one, sigma, eps, +1) + L / (2 * eps) * J1
    p2 = 0.5 * np.exp(sigma * (1 + x) / eps) * _bracket(x, one, sigma, eps, -1) - L / (2 * eps) * J2
    if scalar:
        return float(p1[0]), float(p2[0])
    return p1, p2


def gain_p1(x, sigma: float, eps: float, L: float, panels: int = MIN_PANELS):
    return _gains(x, sigma, eps, L, panels)[0]


def gain_p2(x, sigma: float, eps: float, L: float, panels: int = MIN_PANELS):
    return _gains(x, sigma, eps, L, panels)[1]


def build_gain_profile(n_nodes: int, coeffs: DerivedCoefficients, L: float) -> GainProfile:
    if n_nodes < 2:
        raise ValueError("need at least two grid nodes")
    x = grid_x(n_nodes)
    p1, p2 = _gains(x, coeffs.sigma, coeffs.epsilon, L, default_panels(n_nodes))
    a = coeffs.a
    return GainProfile(
        x_nodes=x,
        p1=p1,
        p2=p2,
        p1_scaled=p1 * np.exp(a * (1 - x)),
        p2_scaled=p2 * np.exp(a * (1 + x)),
        L=L,
        sigma=coeffs.sigma,
        epsilon=coeffs.epsilon,
    )


def adaptation_scale(coeffs: DerivedCoefficients) -> float:
    """``exp(l F / (2 sqrt(beta rho)))`` multiplying the leak-size law."""
    return math.exp(coeffs.a)
