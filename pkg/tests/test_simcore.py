import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pipeleak.acceptance import mass_deficit
from pipeleak.hydraulics import FluidProperties, LeakSpec, OperatingPoint, PipeGeometry, derive_coefficients, steady_state
from pipeleak.riemann import PhysicalProfile, from_riemann, linear_coeffs, scale_to_linear, to_riemann
from pipeleak.simcore import (
    Grid,
    InletSignal,
    LinearPlant,
    NoiseSpec,
    Plant,
    PlantState,
    SimulationDiverged,
    characteristic_step,
    inlet_signal,
)

FLUID = FluidProperties()
GEOM = PipeGeometry(1000.0, 0.5, 0.0, -10.0)
OP = OperatingPoint(0.15, 1e5)
COEFFS = derive_coefficients(FLUID, GEOM, OP)
LEAK = LeakSpec(0.02, 700.0, 15.0, 0.8)


def frictionless(c):
    return dataclasses.replace(c, friction_f=0.0, F=0.0, sigma=0.0)


class TestGrid:
    def test_unit_courant(self):
        g = Grid(200, COEFFS.epsilon, 50.0)
        assert g.dt * g.epsilon == pytest.approx(g.dx, rel=1e-15)
        assert g.n_nodes == 201
        assert g.n_steps == math.ceil(50.0 / g.dt)

    def test_minimum_cells(self):
        with pytest.raises(ValueError):
            Grid(8, 1.0, 1.0)

    def test_exact_multiple_is_not_rounded_up(self):
        g = Grid(16, 16.0, 1.0)
        assert g.n_steps == 256


class TestNoise:
    def test_disabled(self):
        sig = InletSignal(OP, NoiseSpec(enabled=False))
        assert all(sig(t) == 0.15 for t in np.linspace(0, 50, 101))

    def test_deterministic(self):
        a = [inlet_signal(t, OP, NoiseSpec(seed=7)) for t in np.linspace(0, 10, 50)]
        b = [inlet_signal(t, OP, NoiseSpec(seed=7)) for t in np.linspace(0, 10, 50)]
        assert a == b
        c = [inlet_signal(t, OP, NoiseSpec(seed=8)) for t in np.linspace(0, 10, 50)]
        assert a != c

    def test_piecewise_constant(self):
        sig = InletSignal(OP, NoiseSpec())
        assert sig(0.01) == sig(0.49)
        assert sig(0.49) != sig(0.51)

    @settings(max_examples=40, deadline=None)
    @given(t=st.floats(0, 100), frac=st.floats(0.0, 0.5))
    def test_amplitude_bound(self, t, frac):
        q = InletSignal(OP, NoiseSpec(amplitude_frac=frac))(t)
        assert abs(q - 0.15) <= frac * 0.15 + 1e-15

    def test_time_average(self):
        noise = NoiseSpec(seed=1)
        sig = InletSignal(OP, noise)
        windows = int(50 / noise.hold_time)
        mean = np.mean([sig((k + 0.5) * noise.hold_time) for k in range(windows)])
        assert abs(mean - 0.15) <= 2 * noise.amplitude_frac * 0.15 / math.sqrt(windows)

    @pytest.mark.parametrize("kwargs", [{"amplitude_frac": -0.1}, {"hold_time": 0.0}, {"sensor_std": -1.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            NoiseSpec(**kwargs)


class TestTransport:
    def test_shift_is_exact(self):
        rng = np.random.default_rng(0)
        u, v = rng.standard_normal(33), rng.standard_normal(33)
        zero = lambda u, v, s: (np.zeros_like(u), np.zeros_like(v))
        un, vn = characteristic_step(u, v, zero, 0.1, lambda u, v, s: 1.5, lambda u, v, s: -2.5)
        assert np.array_equal(un[1:], u[:-1])
        assert np.array_equal(vn[:-1], v[1:])
        assert un[0] == 1.5 and vn[-1] == -2.5

    def test_frictionless_fixed_point(self):
        flat = PipeGeometry(1000.0, 0.5)
        c = frictionless(derive_coefficients(FLUID, flat, OP))
        grid = Grid(64, c.epsilon, 5.0)
        plant = Plant(c, grid)
        state = PlantState(to_riemann(PhysicalProfile(np.full(65, 1e5), np.full(65, 0.15)), c))
        for _ in range(50):
            nxt = plant.step(state, 0.15, 1e5)
            change = max(np.max(np.abs(nxt.field.u - state.field.u)), np.max(np.abs(nxt.field.v - state.field.v)))
            assert change < 1e-12
            state = nxt

    def test_steady_state_is_held(self):
        grid = Grid(200, COEFFS.epsilon, 3.0 / COEFFS.epsilon)
        plant = Plant(COEFFS, grid)
        state = plant.initial_state()
        ref = state.field.copy()
        for _ in range(grid.n_steps):
            state = plant.step(state, OP.q_in, OP.p_out)
        err = max(np.max(np.abs(state.field.u - ref.u)), np.max(np.abs(state.field.v - ref.v)))
        assert err < 1e-6 * OP.q_in
        phys = from_riemann(state.field, COEFFS)
        steady = steady_state(FLUID, GEOM, OP, grid.n_nodes)
        grad = np.diff(phys.p)
        grad_ref = np.diff(steady.p)
        assert np.max(np.abs(grad - grad_ref)) < 1e-6 * np.max(np.abs(grad_ref))


class TestLeak:
    def test_activation_keeps_physical_state(self):
        grid = Grid(200, COEFFS.epsilon, 20.0)
        plant = Plant(COEFFS, grid, LEAK)
        state = plant.initial_state()
        on = plant.activate_leak(state)
        before = from_riemann(state.field, COEFFS)
        after = from_riemann(on.field, COEFFS, (LEAK.size, LEAK.position))
        assert np.allclose(after.p, before.p, rtol=1e-13)
        assert np.allclose(after.q, before.q, rtol=0, atol=1e-15)
        assert plant.activate_leak(on) is on

    def test_onset_time(self):
        grid = Grid(32, COEFFS.epsilon, 1.0)
        plant = Plant(COEFFS, grid, dataclasses.replace(LEAK, onset_time=0.5))
        state = plant.initial_state()
        while state.t < 0.5 - grid.dt:
            state = plant.step(state, OP.q_in, OP.p_out)
            assert not state.leak_active
        state = plant.step(state, OP.q_in, OP.p_out)
        assert state.leak_active

    def test_mass_deficit(self):
        assert mass_deficit("scenario-B", n_cells=32, t_end=300.0) == pytest.approx(1.0, abs=0.01)

    def test_measurements(self):
        grid = Grid(32, COEFFS.epsilon, 1.0)
        plant = Plant(COEFFS, grid)
        p0, q_l, p_l = plant.measurements(plant.initial_state())
        steady = steady_state(FLUID, GEOM, OP, 33)
        assert p0 == pytest.approx(steady.p[0], rel=1e-12)
        assert q_l == pytest.approx(0.15, rel=1e-12)
        assert p_l == pytest.approx(1e5, rel=1e-10)


class TestDivergence:
    def test_guard(self):
        grid = Grid(32, COEFFS.epsilon, 1.0)
        plant = Plant(COEFFS, grid)
        with pytest.raises(SimulationDiverged) as err:
            plant.step(plant.initial_state(), 1e9, OP.p_out)
        assert err.value.t == pytest.approx(grid.dt)

    def test_nan_input(self):
        grid = Grid(32, COEFFS.epsilon, 1.0)
        plant = Plant(COEFFS, grid)
        with pytest.raises(SimulationDiverged):
            plant.step(plant.initial_state(), float("nan"), OP.p_out)


class TestLinearPlant:
    def test_zero_trajectory(self):
        grid = Grid(64, COEFFS.epsilon, 5.0)
        plant = LinearPlant(COEFFS, linear_coeffs(COEFFS, grid.n_nodes), grid)
        state = plant.initial_state()
        for _ in range(grid.n_steps):
            state = plant.step(state, 0.0, 0.0)
        assert not state.field.u.any() and not state.field.v.any()

    def test_advection_delay(self):
        c = frictionless(COEFFS)
        grid = Grid(64, c.epsilon, 2.0)
        plant = LinearPlant(c, linear_coeffs(c, grid.n_nodes), grid)
        state = plant.initial_state()
        entry = arrival = None
        for n in range(1, grid.n_steps + 1):
            state = plant.step(state, 0.01, 0.0)
            if entry is None and state.field.u[0] != 0.0:
                entry = n
            if arrival is None and state.field.u[-1] != 0.0:
                arrival = n
        assert arrival - entry == grid.n_cells
        assert (arrival - entry) * grid.dt == pytest.approx(1 / c.epsilon, rel=1e-12)
        assert 1 / c.epsilon == pytest.approx(0.682, rel=1e-3)

    def test_leak_switches_on(self):
        grid = Grid(32, COEFFS.epsilon, 2.0)
        plant = LinearPlant(COEFFS, linear_coeffs(COEFFS, grid.n_nodes), grid, dataclasses.replace(LEAK, onset_time=0.5))
        state = plant.initial_state()
        for _ in range(grid.n_steps):
            state = plant.step(state, 0.0, 0.0)
        assert state.leak_active
        assert state.field.u[0] + state.field.v[0] == pytest.approx(-0.02)

    def test_small_perturbation_equivalence(self):
        # the nonlinear response to a 1% inlet step, mapped into linear coordinates,
        # follows the linear plant driven by the same inlet step and outlet trace
        grid = Grid(100, COEFFS.epsilon, 10.0)
        lin = linear_coeffs(COEFFS, grid.n_nodes)
        plant = Plant(COEFFS, grid)
        linear = LinearPlant(COEFFS, lin, grid)
        base = plant.initial_state()
        pert = base.snapshot()
        ls = linear.initial_state()
        dq = 0.01 * OP.q_in
        worst = 0.0
        for _ in range(grid.n_steps):
            base = plant.step(base, OP.q_in, OP.p_out)
            pert = plant.step(pert, OP.q_in + dq, OP.p_out)
            diff = type(base.field)(pert.field.u - base.field.u, pert.field.v - base.field.v)
            mapped = scale_to_linear(diff, COEFFS, offsets=False)
            ls = linear.step(ls, dq, mapped.v[-1])
            worst = max(worst, np.max(np.abs(mapped.u - ls.field.u)), np.max(np.abs(mapped.v - ls.field.v)))
        assert worst <= 0.05 * dq
