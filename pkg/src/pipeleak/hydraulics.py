"""Physical parameters and algebraic hydraulic relations for a single pipe.

Coordinates: ``z`` runs from the inlet (``z = 0``) to the outlet (``z = l``).
The elevation drop is the signed outlet-minus-inlet height, so a pipe whose
inlet sits 10 m above its outlet has ``elevation_drop = -10``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Raised when a hydraulic relation is evaluated outside its domain."""


@dataclass(frozen=True)
class FluidProperties:
    bulk_modulus: float = 2.15e9
    density: float = 1000.0
    dynamic_viscosity: float = 1.0016e-3
    gravity: float = 9.8

    def __post_init__(self):
        if self.bulk_modulus <= 0 or self.density <= 0 or self.dynamic_viscosity <= 0:
            raise ValueError("bulk_modulus, density and dynamic_viscosity must be positive")
        if self.gravity < 0:
            raise ValueError("gravity must be non-negative")


@dataclass(frozen=True)
class PipeGeometry:
    """Straight pipe of constant diameter and constant inclination.

    ``area`` defaults to ``pi * D**2 / 4``. An explicit area is accepted but a
    warning is issued when it disagrees with the diameter.
    """

    length: float = 1000.0
    diameter: float = 0.5
    roughness: float = 0.0
    elevation_drop: float = 0.0
    area: float | None = None

    def __post_init__(self):
        if self.length <= 0 or self.diameter <= 0:
            raise ValueError("length and diameter must be positive")
        if self.roughness < 0:
            raise ValueError("roughness must be non-negative")
        if abs(self.elevation_drop) > self.length:
            raise ValueError("|elevation_drop| cannot exceed the pipe length")
        circle = math.pi * self.diameter**2 / 4.0
        if self.area is None:
            object.__setattr__(self, "area", circle)
        else:
            if self.area <= 0:
                raise ValueError("area must be positive")
            if abs(self.area - circle) > 1e-12 * circle:
                warnings.warn(
                    f"area {self.area} differs from pi*D^2/4 = {circle}", stacklevel=2
                )

    @property
    def sin_phi(self) -> float:
        return self.elevation_drop / self.length


@dataclass(frozen=True)
class OperatingPoint:
    q_in: float = 0.15
    p_out: float = 1e5


@dataclass(frozen=True)
class LeakSpec:
    size: float = 0.02
    position: float = 700.0
    onset_time: float = 15.0
    gamma_d: float = 0.8

    def __post_init__(self):
        if self.size < 0:
            raise ValueError("leak size must be non-negative")
        if self.position <= 0:
            raise ValueError("leak position must be strictly inside the pipe")
        if not 0 < self.gamma_d <= 1:
            raise ValueError("gamma_d must lie in (0, 1]")

    def check_within(self, length: float) -> None:
        if not 0 < self.position < length:
            raise ValueError(f"leak position {self.position} outside (0, {length})")


@dataclass(frozen=True)
class PipelineConfig:
    fluid: FluidProperties = field(default_factory=FluidProperties)
    geometry: PipeGeometry = field(default_factory=PipeGeometry)
    operating_point: OperatingPoint = field(default_factory=OperatingPoint)
    leak: LeakSpec | None = None

    def __post_init__(self):
        if self.leak is not None:
            self.leak.check_within(self.geometry.length)


@dataclass(frozen=True)
class DerivedCoefficients:
    """Model coefficients at one operating point.

    Keeps references to the inputs so that downstream transforms only need
    this one object.
    """

    fluid: FluidProperties
    geometry: PipeGeometry
    operating_point: OperatingPoint
    friction_f: float
    reynolds: float
    F: float
    epsilon: float
    sigma: float
    eta: float
    h: float

    @property
    def sqrt_beta_rho(self) -> float:
        return math.sqrt(self.fluid.bulk_modulus * self.fluid.density)

    @property
    def k(self) -> float:
        """Pressure-to-flow scale ``A / sqrt(beta rho)``."""
        return self.geometry.area / self.sqrt_beta_rho

    @property
    def a(self) -> float:
        """Half exponent ``l F / (2 sqrt(beta rho))`` of the scaling transform."""
        return self.geometry.length * self.F / (2.0 * self.sqrt_beta_rho)

    @property
    def kappa(self) -> float:
        """Friction coefficient ``f / (4 D A)`` of the Riemann-coordinate source."""
        return self.friction_f / (4.0 * self.geometry.diameter * self.geometry.area)

    @property
    def rho_g_h(self) -> float:
        return self.fluid.density * self.fluid.gravity * self.h


def reynolds_number(q, fluid: FluidProperties, geom: PipeGeometry):
    """Signed Reynolds number ``rho q D / (A mu)``."""
    return fluid.density * q * geom.diameter / (geom.area * fluid.dynamic_viscosity)


def friction_factor(Re: float, roughness: float, diameter: float) -> float:
    """Darcy friction factor from the explicit Haaland-type correlation.

    ``1/sqrt(f) = -1.8 log10((E / 3.7 D)**1.11 + 6.9 / Re)``
    """
    if not Re > 0:
        raise DomainError(f"friction factor needs Re > 0, got {Re}")
    arg = (roughness / (3.7 * diameter)) ** 1.11 + 6.9 / Re
    inv_sqrt_f = -1.8 * math.log10(arg)
    if inv_sqrt_f <= 0:
        raise DomainError(f"correlation invalid at Re={Re}: 1/sqrt(f) = {inv_sqrt_f}")
    return 1.0 / inv_sqrt_f**2


def derive_coefficients(
    fluid: FluidProperties,
    geom: PipeGeometry,
    op: OperatingPoint,
    leak: LeakSpec | None = None,
) -> DerivedCoefficients:
    """Freeze friction and the transform coefficients at ``op.q_in``."""
    if op.q_in == 0:
        raise DomainError("q_in must be nonzero to evaluate the friction factor")
    Re = abs(reynolds_number(op.q_in, fluid, geom))
    f = friction_factor(Re, geom.roughness, geom.diameter)
    F = f * fluid.density * abs(op.q_in) / (geom.diameter * geom.area)
    gamma_d = leak.gamma_d if leak is not None else LeakSpec.gamma_d
    return DerivedCoefficients(
        fluid=fluid,
        geometry=geom,
        operating_point=op,
        friction_f=f,
        reynolds=Re,
        F=F,
        epsilon=math.sqrt(fluid.bulk_modulus / fluid.density) / geom.length,
        sigma=-F / (2.0 * fluid.density),
        eta=gamma_d * op.q_in,
        h=geom.elevation_drop,
    )


def coefficients_for(config: PipelineConfig) -> DerivedCoefficients:
    return derive_coefficients(
        config.fluid, config.geometry, config.operating_point, config.leak
    )


def leak_delta(z, z_star: float, length: float):
    """Leak potential for a point leak: ``max(z, z_star) - z``."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(z > length):
        raise ValueError(f"z must lie in [0, {length}]")
    out = np.maximum(z, z_star) - z
    return out if out.ndim else float(out)


def leak_delta_prime(z, z_star: float):
    """``H(z - z_star) - 1`` with the right-continuous convention ``H(0) = 1``."""
    z = np.asarray(z, dtype=float)
    out = np.where(z >= z_star, 0.0, -1.0)
    return out if out.ndim else float(out)


def steady_state(
    fluid: FluidProperties, geom: PipeGeometry, op: OperatingPoint, n_nodes: int = 201
):
    """No-leak equilibrium on ``n_nodes`` uniformly spaced points.

    Uses the friction factor frozen at ``|q_in|``; for ``q_in == 0`` only the
    hydrostatic term remains. Returns a :class:`~pipeleak.riemann.PhysicalProfile`.
    """
    from .riemann import PhysicalProfile

    z = np.linspace(0.0, geom.length, n_nodes)
    q = op.q_in
    if q == 0:
        friction_grad = 0.0
    else:
        Re = abs(reynolds_number(q, fluid, geom))
        f = friction_factor(Re, geom.roughness, geom.diameter)
        friction_grad = f * fluid.density * abs(q) * q / (2.0 * geom.diameter * geom.area**2)
    grad = fluid.density * fluid.gravity * geom.sin_phi + friction_grad
    p = op.p_out + (geom.length - z) * grad
    p[-1] = op.p_out
    return PhysicalProfile(p=p, q=np.full(n_nodes, float(q)))
