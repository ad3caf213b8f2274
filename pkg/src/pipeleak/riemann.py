"""Coordinate machinery: physical <-> Riemann transforms and linear-plant data.

All transforms act on whole profiles sampled on a uniform grid
``x = linspace(0, 1, n)`` (``z = x l``). The inclination is constant, so the
gravity integral ``int_0^{xl} sin(phi)`` is evaluated in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hydraulics import DerivedCoefficients, leak_delta, leak_delta_prime


@dataclass
class RiemannField:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 1 or self.u.size < 2:
            raise ValueError("u and v must be 1-D arrays of equal length >= 2")

    @property
    def grid_n(self) -> int:
        return self.u.size

    def copy(self) -> RiemannField:
        return RiemannField(self.u.copy(), self.v.copy())


@dataclass
class PhysicalProfile:
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if self.p.shape != self.q.shape:
            raise ValueError("p and q must have the same shape")


@dataclass(frozen=True)
class LinearPlantCoeffs:
    epsilon: float
    x: np.ndarray
    c1: np.ndarray
    c2: np.ndarray


def grid_x(n_nodes: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_nodes)


def _leak_terms(n_nodes, coeffs, leak_state):
    """Return ``delta'(xl) chi`` on the grid, or 0 when there is no leak."""
    chi, z_star = leak_state if leak_state is not None else (0.0, None)
    if chi == 0 or z_star is None:
        return np.zeros(n_nodes)
    z = grid_x(n_nodes) * coeffs.geometry.length
    return leak_delta_prime(z, z_star) * chi


def gravity_integral(n_nodes: int, coeffs: DerivedCoefficients) -> np.ndarray:
    g = coeffs.geometry
    return g.sin_phi * g.length * grid_x(n_nodes)


def to_riemann(phys: PhysicalProfile, coeffs: DerivedCoefficients, leak_state=None) -> RiemannField:
    """Map ``(p, q)`` to ``(u, v)``; ``leak_state`` is ``(chi, z_star)`` or None."""
    n = phys.p.size
    rho = coeffs.fluid.density
    A = coeffs.geometry.area
    dchi = _leak_terms(n, coeffs, leak_state)
    head = phys.p + rho * coeffs.fluid.gravity * gravity_integral(n, coeffs) + rho / A**2 * coeffs.eta * dchi
    flow = phys.q + dchi
    return RiemannField(0.5 * (flow + coeffs.k * head), 0.5 * (flow - coeffs.k * head))


def from_riemann(field: RiemannField, coeffs: DerivedCoefficients, leak_state=None) -> PhysicalProfile:
    n = field.grid_n
    rho = coeffs.fluid.density
    A = coeffs.geometry.area
    dchi = _leak_terms(n, coeffs, leak_state)
    q = field.u + field.v - dchi
    p = (
        (field.u - field.v) / coeffs.k
        - rho * coeffs.fluid.gravity * gravity_integral(n, coeffs)
        - rho / A**2 * coeffs.eta * dchi
    )
    return PhysicalProfile(p=p, q=q)


def inlet_pressure(u0: float, v0: float, chi: float, coeffs: DerivedCoefficients) -> float:
    """Physical ``p(0)`` from the Riemann values at ``x = 0`` (``delta'(0) = -1``)."""
    rho = coeffs.fluid.density
    return (u0 - v0) / coeffs.k + rho / coeffs.geometry.area**2 * coeffs.eta * chi


def measurement_y(p_l, q_l, coeffs: DerivedCoefficients):
    """Output ``y = u(1)`` built from outlet pressure and flow."""
    return 0.5 * (q_l + coeffs.k * (p_l + coeffs.rho_g_h))


def boundary_input_U(p_l, q_l, coeffs: DerivedCoefficients, form: str = "riemann"):
    """Outlet input.

    ``form="riemann"`` returns ``v(1)`` for the nonlinear observer.
    ``form="linear"`` returns the exponentially scaled input ``U(t)`` of the
    linear plant, with the scaling evaluated at ``x = 1``.
    """
    if form == "riemann":
        return 0.5 * (q_l - coeffs.k * (p_l + coeffs.rho_g_h))
    if form == "linear":
        op = coeffs.operating_point
        g = coeffs.geometry
        bracket = p_l - op.p_out + coeffs.rho_g_h + coeffs.F * g.length * op.q_in / g.area
        return 0.5 * math.exp(-coeffs.a) * (q_l - op.q_in - coeffs.k * bracket)
    raise ValueError(f"unknown form {form!r}")


def linear_coeffs(coeffs: DerivedCoefficients, n_nodes: int) -> LinearPlantCoeffs:
    x = grid_x(n_nodes)
    growth = np.exp(2.0 * coeffs.a * x)
    return LinearPlantCoeffs(
        epsilon=coeffs.epsilon,
        x=x,
        c1=coeffs.sigma * growth,
        c2=coeffs.sigma / growth,
    )


def linearise(field: RiemannField, coeffs: DerivedCoefficients) -> RiemannField:
    """Perturbation about the symmetric mean ``u_bar = v_bar = q_in / 2``."""
    half = 0.5 * coeffs.operating_point.q_in
    return RiemannField(field.u - half, field.v - half)


def delinearise(field: RiemannField, coeffs: DerivedCoefficients) -> RiemannField:
    half = 0.5 * coeffs.operating_point.q_in
    return RiemannField(field.u + half, field.v + half)


def _scaling_offset(n, coeffs, chi, z_star, offsets):
    if not offsets:
        return 0.0
    g = coeffs.geometry
    offset = np.full(n, coeffs.operating_point.p_out)
    if chi and z_star is not None:
        z = grid_x(n) * g.length
        offset = offset + coeffs.F / g.area * leak_delta(z, z_star, g.length) * chi
    return 0.5 * coeffs.k * offset


def scale_from_linear(field: RiemannField, coeffs, chi=0.0, z_star=None, offsets=True) -> RiemannField:
    """``(du, dv) -> (du_, dv_)``: exponential scaling plus pressure/leak offsets."""
    x = grid_x(field.grid_n)
    off = _scaling_offset(field.grid_n, coeffs, chi, z_star, offsets)
    return RiemannField(
        field.u * np.exp(-coeffs.a * x) + off,
        field.v * np.exp(coeffs.a * x) - off,
    )


def scale_to_linear(field: RiemannField, coeffs, chi=0.0, z_star=None, offsets=True) -> RiemannField:
    """Inverse of :func:`scale_from_linear`."""
    x = grid_x(field.grid_n)
    off = _scaling_offset(field.grid_n, coeffs, chi, z_star, offsets)
    return RiemannField(
        (field.u - off) * np.exp(coeffs.a * x),
        (field.v + off) * np.exp(-coeffs.a * x),
    )
