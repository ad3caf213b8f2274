"""Adaptive leak observers.

Three observers share the unit-CFL stepping of :mod:`pipeleak.simcore`:

* :class:`NonlinearObserver` - the observer run on the nonlinear plant, with
  nonlinear friction, scaled gains and a Heaviside leak profile at the
  current location estimate;
* :class:`LinearObserver` - the backstepping observer for the linear plant in
  exponentially scaled perturbation coordinates;
* :class:`ScaledLinearObserver` - the same linear observer written in
  unscaled perturbation coordinates with the scaled gains. It exists to check
  that the two formulations commute with the scaling transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hydraulics import DerivedCoefficients, leak_delta_prime
from .kernels import GainProfile, adaptation_scale
from .riemann import LinearPlantCoeffs, RiemannField, inlet_pressure, measurement_y
from .simcore import DIVERGENCE_FACTOR, Grid, SimulationDiverged

P0_VARIANTS = ("plain", "offset")


@dataclass(frozen=True)
class AdaptationConfig:
    L: float = -1.0
    gamma: float = 0.2
    localization_enabled: bool = True
    localization_start_delay: float = 5.0
    chi_detection_threshold: float = 0.005
    detection_hold: float = 1.0
    p0_variant: str = "plain"
    project_chi: bool = False

    def __post_init__(self):
        if not self.L < 0:
            raise ValueError("L must be negative")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.p0_variant not in P0_VARIANTS:
            raise ValueError(f"p0_variant must be one of {P0_VARIANTS}")
        if self.localization_start_delay < 0 or self.detection_hold < 0:
            raise ValueError("delays must be non-negative")


@dataclass
class ObserverState:
    field_hat: RiemannField
    chi_hat: float = 0.0
    delta_hat: float = 0.0
    t: float = 0.0

    def snapshot(self) -> ObserverState:
        return ObserverState(self.field_hat.copy(), self.chi_hat, self.delta_hat, self.t)


@dataclass(frozen=True)
class Measurements:
    """Boundary signals at one time level."""

    q0: float
    p0: float
    q_l: float
    p_l: float


def proj_interval(value: float, rate: float, lo: float, hi: float) -> float:
    if (value <= lo and rate < 0) or (value >= hi and rate > 0):
        return 0.0
    return rate


class DetectionLogic:
    """Online leak alarm: ``chi_hat`` above threshold for ``detection_hold`` seconds."""

    def __init__(self, config: AdaptationConfig):
        self.config = config
        self.above_since: float | None = None
        self.detection_time: float | None = None
        self.detected_size: float | None = None

    def update(self, t: float, chi_hat: float) -> bool:
        if self.detection_time is not None:
            return True
        if chi_hat > self.config.chi_detection_threshold:
            if self.above_since is None:
                self.above_since = t
            if t - self.above_since >= self.config.detection_hold - 1e-12:
                self.detection_time = t
                self.detected_size = chi_hat
                return True
        else:
            self.above_since = None
        return False

    @property
    def localization_start(self) -> float | None:
        if self.detection_time is None:
            return None
        return self.detection_time + self.config.localization_start_delay

    def localization_active(self, t: float) -> bool:
        start = self.localization_start
        return self.config.localization_enabled and start is not None and t >= start - 1e-12


@dataclass(frozen=True)
class DetectionEvent:
    time: float
    size: float
    localization_start: float


def detection_logic(times, chi_hat, config: AdaptationConfig) -> DetectionEvent | None:
    """Offline version of :class:`DetectionLogic` over a recorded series."""
    logic = DetectionLogic(config)
    for t, c in zip(times, chi_hat):
        if logic.update(float(t), float(c)):
            return DetectionEvent(logic.detection_time, logic.detected_size, logic.localization_start)
    return None


def estimated_p0(u0, v0, chi_hat, delta_hat, coeffs: DerivedCoefficients, variant: str = "plain"):
    """Model inlet pressure from the observer's boundary values.

    ``plain`` matches :func:`pipeleak.riemann.inlet_pressure`, so it shares the
    gauge of the physical measurement. ``offset`` adds ``p_out`` and the linear
    friction term ``F delta_hat chi_hat / A``.
    """
    p = inlet_pressure(u0, v0, chi_hat, coeffs)
    if variant == "offset":
        p += coeffs.operating_point.p_out + coeffs.F / coeffs.geometry.area * delta_hat * chi_hat
    elif variant != "plain":
        raise ValueError(f"unknown p0 variant {variant!r}")
    return p


def _check(field, chi, t, scale, what="observer"):
    limit = DIVERGENCE_FACTOR * scale
    if not (np.all(np.isfinite(field[0])) and np.all(np.isfinite(field[1])) and math.isfinite(chi)):
        raise SimulationDiverged(t, what)
    if max(np.max(np.abs(field[0])), np.max(np.abs(field[1])), abs(chi)) > limit:
        raise SimulationDiverged(t, what)


class _AdaptiveBase:
    def __init__(self, coeffs: DerivedCoefficients, gains: GainProfile, config: AdaptationConfig, grid: Grid):
        if gains.x_nodes.size != grid.n_nodes:
            raise ValueError("gain profile and grid disagree on node count")
        self.coeffs = coeffs
        self.gains = gains
        self.config = config
        self.grid = grid
        self.detector = DetectionLogic(config)
        self.scale = max(abs(coeffs.operating_point.q_in), 1e-12)
        self.length = coeffs.geometry.length

    def _update_delta(self, obs: ObserverState, p0: float, p0_hat: float) -> float:
        active = self.detector.localization_active(obs.t)
        if not active:
            return obs.delta_hat
        rate = proj_interval(obs.delta_hat, self.config.gamma * (p0 - p0_hat), 0.0, self.length)
        return min(max(obs.delta_hat + self.grid.dt * rate, 0.0), self.length)

    def _project_chi(self, chi):
        if self.config.project_chi:
            return min(max(chi, 0.0), abs(self.coeffs.operating_point.q_in))
        return chi


class NonlinearObserver(_AdaptiveBase):
    """Observer with nonlinear friction driven by boundary measurements."""

    def __init__(self, coeffs, gains, config, grid):
        super().__init__(coeffs, gains, config, grid)
        self.chi_gain = config.L * adaptation_scale(coeffs)
        self.z = grid.x * coeffs.geometry.length

    def initial_state(self, field: RiemannField) -> ObserverState:
        return ObserverState(field.copy(), 0.0, 0.5 * self.length, 0.0)

    def delta_prime_hat(self, delta_hat: float) -> np.ndarray:
        return leak_delta_prime(self.z, delta_hat)

    def output(self, p_l, q_l):
        return measurement_y(p_l, q_l, self.coeffs)

    def p0_hat(self, obs: ObserverState) -> float:
        u, v = obs.field_hat.u, obs.field_hat.v
        return estimated_p0(u[0], v[0], obs.chi_hat, obs.delta_hat, self.coeffs, self.config.p0_variant)

    def step(self, obs: ObserverState, prev: Measurements, new: Measurements) -> ObserverState:
        return nonlinear_observer_step(obs, prev, new, self)


def _injected_heun(u, v, base, g1, g2, y0, y1, dt, chi_hat, chi_gain, left, v_right, project=None, v_predict=None):
    """Heun step of an output-injection observer along unit-CFL characteristics.

    ``base(u, v, chi)`` returns the plant-like sources. The corrector output
    error ``e1 = y1 - u_new(1)`` is solved from the trapezoid update at the
    outlet node, so an observer that matches the plant stays matched.
    ``v_predict(u_last)``, when given, sets the predictor-stage outlet value
    the way the plant does; the final value is always ``v_right``.
    """
    project = project or (lambda c: c)
    e0 = y0 - u[-1]
    bu0, bv0 = base(u, v, chi_hat)
    su0 = bu0 + g1 * e0
    sv0 = bv0 + g2 * e0
    chi_p = project(chi_hat + dt * chi_gain * e0)
    us = np.empty_like(u)
    vs = np.empty_like(v)
    us[1:] = u[:-1] + dt * su0[:-1]
    vs[:-1] = v[1:] + dt * sv0[1:]
    vs[-1] = v_right if v_predict is None else v_predict(us[-1])
    us[0] = left(vs[0], chi_p)
    bu1, bv1 = base(us, vs, chi_p)
    outlet = u[-2] + 0.5 * dt * (su0[-2] + bu1[-1])
    e1 = (y1 - outlet) / (1.0 + 0.5 * dt * g1[-1])
    su1 = bu1 + g1 * e1
    sv1 = bv1 + g2 * e1
    chi_n = project(chi_hat + 0.5 * dt * chi_gain * (e0 + e1))
    un = np.empty_like(u)
    vn = np.empty_like(v)
    un[1:] = u[:-1] + 0.5 * dt * (su0[:-1] + su1[1:])
    vn[:-1] = v[1:] + 0.5 * dt * (sv0[1:] + sv1[:-1])
    vn[-1] = v_right
    un[0] = left(vn[0], chi_n)
    return un, vn, chi_n


def nonlinear_observer_step(obs: ObserverState, prev: Measurements, new: Measurements, ob: NonlinearObserver) -> ObserverState:
    """Advance the nonlinear adaptive observer by one ``dt``.

    ``prev`` holds the measurements at the current time, ``new`` those one
    step later (the plant is stepped first).
    """
    c = ob.coeffs
    dt = ob.grid.dt
    kappa = c.kappa
    dprime = ob.delta_prime_hat(obs.delta_hat)

    def base(u, v, chi):
        w = u + v - dprime * chi
        s = -kappa * np.abs(w) * w
        return s, s

    un, vn, chi_new = _injected_heun(
        obs.field_hat.u,
        obs.field_hat.v,
        base,
        ob.gains.p1_scaled,
        ob.gains.p2_scaled,
        ob.output(prev.p_l, prev.q_l),
        ob.output(new.p_l, new.q_l),
        dt,
        obs.chi_hat,
        ob.chi_gain,
        left=lambda v0, chi: -v0 + new.q0 - chi,
        v_right=0.5 * (new.q_l - c.k * (new.p_l + c.rho_g_h)),
        project=ob._project_chi,
        # pressure-held outlet reflects the predicted characteristic, as in the plant
        v_predict=lambda u_last: u_last - c.k * (new.p_l + c.rho_g_h),
    )
    t_new = obs.t + dt
    _check((un, vn), chi_new, t_new, ob.scale)
    nxt = ObserverState(RiemannField(un, vn), chi_new, obs.delta_hat, t_new)
    ob.detector.update(t_new, chi_new)
    nxt.delta_hat = ob._update_delta(nxt, new.p0, ob.p0_hat(nxt))
    return nxt


class LinearObserver(_AdaptiveBase):
    """Backstepping observer for the linear plant with the position estimator.

    Works on perturbation states; the inlet-pressure model always includes
    ``p_out`` and ``F delta_hat chi_hat / A``.
    """

    def __init__(self, coeffs, gains, config, grid, lin: LinearPlantCoeffs):
        super().__init__(coeffs, gains, config, grid)
        self.lin = lin

    def initial_state(self, field: RiemannField | None = None) -> ObserverState:
        n = self.grid.n_nodes
        field = field.copy() if field is not None else RiemannField(np.zeros(n), np.zeros(n))
        return ObserverState(field, 0.0, 0.5 * self.length, 0.0)

    def p0_hat(self, obs: ObserverState) -> float:
        u, v = obs.field_hat.u, obs.field_hat.v
        return estimated_p0(u[0], v[0], obs.chi_hat, obs.delta_hat, self.coeffs, "offset")

    def step(self, obs, dy_prev, dy_new, dq0, U, p0=None):
        nxt = linear_observer_step(obs, dy_prev, dy_new, dq0, U, self)
        self.detector.update(nxt.t, nxt.chi_hat)
        if p0 is not None:
            nxt.delta_hat = linear_position_estimator_step(nxt, p0, self)
        return nxt


def linear_observer_step(obs: ObserverState, dy_prev: float, dy_new: float, dq0: float, U: float, ob: LinearObserver) -> ObserverState:
    """One ``dt`` of the linear adaptive observer (Heun along characteristics)."""
    c1, c2 = ob.lin.c1, ob.lin.c2
    un, vn, chi_new = _injected_heun(
        obs.field_hat.u,
        obs.field_hat.v,
        lambda u, v, chi: (c1 * v, c2 * u),
        ob.gains.p1,
        ob.gains.p2,
        dy_prev,
        dy_new,
        ob.grid.dt,
        obs.chi_hat,
        ob.config.L,
        left=lambda v0, chi: -v0 + dq0 - chi,
        v_right=U,
    )
    t_new = obs.t + ob.grid.dt
    _check((un, vn), chi_new, t_new, ob.scale, "linear observer")
    return ObserverState(RiemannField(un, vn), chi_new, obs.delta_hat, t_new)


def linear_position_estimator_step(obs: ObserverState, p0_measured: float, ob: LinearObserver) -> float:
    """Projected gradient update of ``delta_hat`` (gated by the detector)."""
    return ob._update_delta(obs, p0_measured, ob.p0_hat(obs))


class ScaledLinearObserver(_AdaptiveBase):
    """Linear observer in unscaled perturbation coordinates with scaled gains.

    States are ``du_ = du exp(-a x)``, ``dv_ = dv exp(a x)``; the coupling is
    ``sigma (du_ + dv_)``. The self-coupling ``sigma du_`` (resp. ``sigma dv_``)
    is integrated exactly along the characteristic (integrating-factor Heun),
    the remaining terms by the trapezoid rule.
    """

    def __init__(self, coeffs, gains, config, grid):
        super().__init__(coeffs, gains, config, grid)
        self.chi_gain = config.L * adaptation_scale(coeffs)
        self.decay = math.exp(coeffs.sigma * grid.dt)
        self.out_scale = math.exp(-coeffs.a)
        self.in_scale = math.exp(coeffs.a)

    def initial_state(self, field: RiemannField | None = None) -> ObserverState:
        n = self.grid.n_nodes
        field = field.copy() if field is not None else RiemannField(np.zeros(n), np.zeros(n))
        return ObserverState(field, 0.0, 0.5 * self.length, 0.0)

    def step(self, obs: ObserverState, dy_prev, dy_new, dq0, U) -> ObserverState:
        """``dy_*`` and ``U`` are in the coordinates of :class:`LinearObserver`; mapped here."""
        sigma = self.coeffs.sigma
        E = self.decay
        dt = self.grid.dt
        g1, g2 = self.gains.p1_scaled, self.gains.p2_scaled
        y = (dy_prev * self.out_scale, dy_new * self.out_scale)
        vr = U * self.in_scale
        u, v = obs.field_hat.u, obs.field_hat.v

        e0 = y[0] - u[-1]
        nu0 = sigma * v + g1 * e0
        nv0 = sigma * u + g2 * e0
        chi_s = obs.chi_hat + dt * self.chi_gain * e0
        us = np.empty_like(u)
        vs = np.empty_like(v)
        us[1:] = E * (u[:-1] + dt * nu0[:-1])
        vs[:-1] = E * (v[1:] + dt * nv0[1:])
        vs[-1] = vr
        us[0] = -vs[0] + dq0 - chi_s

        outlet = E * u[-2] + 0.5 * dt * (E * nu0[-2] + sigma * vs[-1])
        e1 = (y[1] - outlet) / (1.0 + 0.5 * dt * g1[-1])
        nu1 = sigma * vs + g1 * e1
        nv1 = sigma * us + g2 * e1
        chi_n = obs.chi_hat + 0.5 * dt * self.chi_gain * (e0 + e1)
        un = np.empty_like(u)
        vn = np.empty_like(v)
        un[1:] = E * u[:-1] + 0.5 * dt * (E * nu0[:-1] + nu1[1:])
        vn[:-1] = E * v[1:] + 0.5 * dt * (E * nv0[1:] + nv1[:-1])
        vn[-1] = vr
        un[0] = -vn[0] + dq0 - chi_n
        t_new = obs.t + dt
        _check((un, vn), chi_n, t_new, self.scale, "scaled linear observer")
        return ObserverState(RiemannField(un, vn), chi_n, obs.delta_hat, t_new)
