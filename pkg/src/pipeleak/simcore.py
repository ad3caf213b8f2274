"""Time stepping for the pipe plant in Riemann coordinates.

Transport runs at unit Courant number (``dt = dx / epsilon``) so each
characteristic moves exactly one node per step; all discretisation error lives
in the source integration, done with a two-stage explicit trapezoid (Heun)
along the characteristic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .hydraulics import DerivedCoefficients, LeakSpec, OperatingPoint, leak_delta_prime, steady_state
from .riemann import (
    LinearPlantCoeffs,
    RiemannField,
    from_riemann,
    grid_x,
    inlet_pressure,
    to_riemann,
)

DIVERGENCE_FACTOR = 1e6


class SimulationDiverged(RuntimeError):
    def __init__(self, t: float, what: str = "state"):
        super().__init__(f"{what} diverged at t = {t:.6g} s")
        self.t = t


@dataclass(frozen=True)
class Grid:
    n_cells: int
    epsilon: float
    t_end: float

    def __post_init__(self):
        if self.n_cells < 16:
            raise ValueError("n_cells must be at least 16")
        if self.epsilon <= 0 or self.t_end <= 0:
            raise ValueError("epsilon and t_end must be positive")

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def dt(self) -> float:
        return self.dx / self.epsilon

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def n_steps(self) -> int:
        return math.ceil(self.t_end / self.dt - 1e-9)

    @cached_property
    def x(self) -> np.ndarray:
        return grid_x(self.n_nodes)


@dataclass(frozen=True)
class NoiseSpec:
    seed: int = 1
    amplitude_frac: float = 0.05
    hold_time: float = 0.5
    enabled: bool = True
    sensor_std: float = 0.0

    def __post_init__(self):
        if not 0 <= self.amplitude_frac <= 0.5:
            raise ValueError("amplitude_frac must lie in [0, 0.5]")
        if self.hold_time <= 0:
            raise ValueError("hold_time must be positive")
        if self.sensor_std < 0:
            raise ValueError("sensor_std must be non-negative")


class InletSignal:
    """Piecewise-constant random fluctuation of the inlet flow around ``q_in``.

    Window ``k`` covers ``[k hold_time, (k+1) hold_time)`` and draws its value
    from a generator seeded with ``(seed, k)``, so any window can be
    reproduced on its own.
    """

    def __init__(self, op: OperatingPoint, noise: NoiseSpec):
        self.q_in = op.q_in
        self.noise = noise
        self._cache: dict[int, float] = {}

    def window_value(self, k: int) -> float:
        if k not in self._cache:
            rng = np.random.default_rng([self.noise.seed, k])
            self._cache[k] = rng.uniform(-1.0, 1.0)
        return self._cache[k]

    def __call__(self, t: float) -> float:
        if not self.noise.enabled or self.noise.amplitude_frac == 0:
            return self.q_in
        k = int(math.floor(t / self.noise.hold_time + 1e-12))
        return self.q_in * (1.0 + self.noise.amplitude_frac * self.window_value(k))


def inlet_signal(t: float, op: OperatingPoint, noise: NoiseSpec) -> float:
    return InletSignal(op, noise)(t)


@dataclass
class PlantState:
    field: RiemannField
    t: float = 0.0
    leak_active: bool = False

    def snapshot(self) -> PlantState:
        return PlantState(self.field.copy(), self.t, self.leak_active)


def _guard(arrays, scale, t, what):
    limit = DIVERGENCE_FACTOR * scale
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > limit:
            raise SimulationDiverged(t, what)


def characteristic_step(u, v, source, dt, u_left, v_right):
    """One Heun step of ``u_t + eps u_x = Su``, ``v_t - eps v_x = Sv`` at unit CFL.

    ``source(u, v, stage)`` returns ``(Su, Sv)``; ``u_left(u, v, stage)`` and
    ``v_right(u, v, stage)`` give the boundary values at the new time level
    from the interior values just computed.
    """
    su0, sv0 = source(u, v, 0)
    us = np.empty_like(u)
    vs = np.empty_like(v)
    us[1:] = u[:-1] + dt * su0[:-1]
    vs[:-1] = v[1:] + dt * sv0[1:]
    vs[-1] = v_right(us, vs, 0)
    us[0] = u_left(us, vs, 0)
    su1, sv1 = source(us, vs, 1)
    un = np.empty_like(u)
    vn = np.empty_like(v)
    un[1:] = u[:-1] + 0.5 * dt * (su0[:-1] + su1[1:])
    vn[:-1] = v[1:] + 0.5 * dt * (sv0[1:] + sv1[:-1])
    vn[-1] = v_right(un, vn, 1)
    un[0] = u_left(un, vn, 1)
    return un, vn


class Plant:
    """Nonlinear plant with a point leak switched on at ``leak.onset_time``.

    The outlet pressure is held at ``p_l`` (default ``p_out``); the inlet flow
    follows the supplied signal.
    """

    def __init__(self, coeffs: DerivedCoefficients, grid: Grid, leak: LeakSpec | None = None):
        self.coeffs = coeffs
        self.grid = grid
        self.leak = leak
        z = grid.x * coeffs.geometry.length
        self.delta_prime = leak_delta_prime(z, leak.position) if leak is not None else np.zeros(grid.n_nodes)
        self.scale = abs(coeffs.operating_point.q_in)

    def initial_state(self) -> PlantState:
        c = self.coeffs
        phys = steady_state(c.fluid, c.geometry, c.operating_point, self.grid.n_nodes)
        return PlantState(to_riemann(phys, c), t=0.0)

    def leak_state(self, state: PlantState):
        if self.leak is None or not state.leak_active:
            return None
        return (self.leak.size, self.leak.position)

    def chi_active(self, state: PlantState) -> float:
        return self.leak.size if (self.leak is not None and state.leak_active) else 0.0

    def activate_leak(self, state: PlantState) -> PlantState:
        """Switch the leak on keeping the physical ``(p, q)`` continuous."""
        if self.leak is None or state.leak_active:
            return state
        phys = from_riemann(state.field, self.coeffs)
        field = to_riemann(phys, self.coeffs, (self.leak.size, self.leak.position))
        return PlantState(field, state.t, True)

    def step(self, state: PlantState, q0: float, p_l: float) -> PlantState:
        return plant_step(state, q0, p_l, self, self.coeffs, self.grid)

    def measurements(self, state: PlantState):
        """``(p0, q_l, p_l)`` from the current state."""
        u, v = state.field.u, state.field.v
        c = self.coeffs
        chi = self.chi_active(state)
        p0 = inlet_pressure(u[0], v[0], chi, c)
        q_l = u[-1] + v[-1]
        p_l = (u[-1] - v[-1]) / c.k - c.rho_g_h
        return p0, q_l, p_l


def plant_step(state: PlantState, q0: float, p_l: float, plant: Plant, coeffs, grid: Grid) -> PlantState:
    """Advance the nonlinear Riemann-coordinate plant by one ``dt``."""
    t_new = state.t + grid.dt
    if plant.leak is not None and not state.leak_active and t_new >= plant.leak.onset_time - 1e-12:
        state = plant.activate_leak(state)
    chi = plant.chi_active(state)
    shift = plant.delta_prime * chi
    kappa = coeffs.kappa
    outlet = coeffs.k * (p_l + coeffs.rho_g_h)

    def source(u, v, stage):
        w = u + v - shift
        s = -kappa * np.abs(w) * w
        return s, s

    un, vn = characteristic_step(
        state.field.u,
        state.field.v,
        source,
        grid.dt,
        u_left=lambda u, v, s: -v[0] + q0 - chi,
        v_right=lambda u, v, s: u[-1] - outlet,
    )
    _guard((un, vn), plant.scale, t_new, "plant")
    return PlantState(RiemannField(un, vn), t_new, state.leak_active)


class LinearPlant:
    """Linear validation plant in exponentially scaled perturbation coordinates.

    The outlet input ``U(t)`` is exogenous (zero by default, i.e. the outlet
    stays at its operating point). The inlet pressure is reconstructed from the
    symmetric linearisation ``u_bar = v_bar = q_in / 2``:
    ``p0 = (du(0) - dv(0)) / k + p_out + rho eta chi / A^2 + F z* chi / A``.
    """

    def __init__(self, coeffs: DerivedCoefficients, lin: LinearPlantCoeffs, grid: Grid, leak: LeakSpec | None = None):
        self.coeffs = coeffs
        self.lin = lin
        self.grid = grid
        self.leak = leak
        self.scale = abs(coeffs.operating_point.q_in)

    def initial_state(self) -> PlantState:
        n = self.grid.n_nodes
        return PlantState(RiemannField(np.zeros(n), np.zeros(n)))

    def chi_active(self, state: PlantState) -> float:
        return self.leak.size if (self.leak is not None and state.leak_active) else 0.0

    def step(self, state: PlantState, dq0: float, U: float = 0.0) -> PlantState:
        t_new = state.t + self.grid.dt
        active = state.leak_active or (
            self.leak is not None and t_new >= self.leak.onset_time - 1e-12
        )
        chi = self.leak.size if (self.leak is not None and active) else 0.0
        nxt = linear_plant_step(state, dq0, U, self.lin, chi, self.grid, self.scale)
        nxt.leak_active = active
        return nxt

    def p0(self, state: PlantState) -> float:
        c = self.coeffs
        chi = self.chi_active(state)
        z_star = self.leak.position if self.leak is not None else 0.0
        u, v = state.field.u, state.field.v
        A = c.geometry.area
        return (
            (u[0] - v[0]) / c.k
            + c.operating_point.p_out
            + c.fluid.density / A**2 * c.eta * chi
            + c.F / A * z_star * chi
        )


def linear_plant_step(state: PlantState, dq0: float, U: float, lin: LinearPlantCoeffs, chi: float, grid: Grid, scale: float = 1.0) -> PlantState:
    """One ``dt`` of the coupled linear transport system with exogenous inputs."""
    c1, c2 = lin.c1, lin.c2

    def source(u, v, stage):
        return c1 * v, c2 * u

    un, vn = characteristic_step(
        state.field.u,
        state.field.v,
        source,
        grid.dt,
        u_left=lambda u, v, s: -v[0] + dq0 - chi,
        v_right=lambda u, v, s: U,
    )
    t_new = state.t + grid.dt
    _guard((un, vn), max(scale, 1e-12), t_new, "linear plant")
    return PlantState(RiemannField(un, vn), t_new, state.leak_active)
