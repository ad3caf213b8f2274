import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pipeleak.acceptance import commutation_error, zero_error_drift
from pipeleak.harness.config import load_config
from pipeleak.harness.runner import run_scenario
from pipeleak.hydraulics import LeakSpec, coefficients_for
from pipeleak.kernels import GainProfile, build_gain_profile
from pipeleak.observer import (
    AdaptationConfig,
    DetectionLogic,
    LinearObserver,
    Measurements,
    NonlinearObserver,
    ObserverState,
    detection_logic,
    estimated_p0,
    proj_interval,
)
from pipeleak.riemann import inlet_pressure, linear_coeffs
from pipeleak.simcore import Grid, LinearPlant, Plant

CFG_A = load_config("scenario-A")
COEFFS = coefficients_for(CFG_A.pipeline)


def setup(n_cells=32, t_end=10.0, config=None, leak=None):
    grid = Grid(n_cells, COEFFS.epsilon, t_end)
    gains = build_gain_profile(grid.n_nodes, COEFFS, -1.0)
    ob = NonlinearObserver(COEFFS, gains, config or AdaptationConfig(), grid)
    return grid, gains, ob, Plant(COEFFS, grid, leak)


class TestProjection:
    def test_interior(self):
        assert proj_interval(500.0, -3.0, 0.0, 1000.0) == -3.0

    def test_upper(self):
        assert proj_interval(1000.0, 2.0, 0.0, 1000.0) == 0.0
        assert proj_interval(1000.0, -2.0, 0.0, 1000.0) == -2.0

    def test_lower(self):
        assert proj_interval(0.0, -1.0, 0.0, 1000.0) == 0.0
        assert proj_interval(0.0, 1.0, 0.0, 1000.0) == 1.0


class TestConfig:
    @pytest.mark.parametrize("kwargs", [{"L": 0.0}, {"gamma": 0.0}, {"p0_variant": "other"},
                                        {"localization_start_delay": -1.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            AdaptationConfig(**kwargs)


class TestDetection:
    cfg = AdaptationConfig()

    def test_zero_series(self):
        t = np.linspace(0, 50, 5001)
        assert detection_logic(t, np.zeros_like(t), self.cfg) is None

    def test_threshold_above_truth(self):
        t = np.linspace(0, 50, 5001)
        chi = np.where(t > 15, 0.02, 0.0)
        assert detection_logic(t, chi, dataclasses.replace(self.cfg, chi_detection_threshold=0.03)) is None

    def test_step(self):
        t = np.linspace(0, 50, 5001)
        chi = np.where(t >= 15, 0.02, 0.0)
        event = detection_logic(t, chi, self.cfg)
        assert event.time == pytest.approx(16.0, abs=0.011)
        assert event.localization_start == pytest.approx(event.time + 5.0)
        assert event.size == 0.02

    def test_dip_resets_hold(self):
        logic = DetectionLogic(self.cfg)
        logic.update(0.0, 0.01)
        logic.update(0.6, 0.0)
        assert not logic.update(1.2, 0.01)
        assert not logic.update(2.1, 0.01)
        assert logic.update(2.2, 0.01)
        assert logic.detection_time == 2.2

    def test_localization_gate(self):
        logic = DetectionLogic(self.cfg)
        for t in np.arange(0, 2.01, 0.1):
            logic.update(t, 0.01)
        assert not logic.localization_active(5.0)
        assert logic.localization_active(logic.detection_time + 5.0)
        off = DetectionLogic(dataclasses.replace(self.cfg, localization_enabled=False))
        for t in np.arange(0, 2.01, 0.1):
            off.update(t, 0.01)
        assert not off.localization_active(100.0)


class TestInletPressureModel:
    def test_plain_matches_physical(self):
        assert estimated_p0(0.3, 0.1, 0.02, 400.0, COEFFS) == inlet_pressure(0.3, 0.1, 0.02, COEFFS)

    def test_offset_variant(self):
        base = estimated_p0(0.3, 0.1, 0.02, 400.0, COEFFS)
        full = estimated_p0(0.3, 0.1, 0.02, 400.0, COEFFS, "offset")
        assert full - base == pytest.approx(1e5 + COEFFS.F / COEFFS.geometry.area * 400.0 * 0.02)

    def test_no_position_dependence_without_leak(self):
        a = estimated_p0(0.3, 0.1, 0.0, 100.0, COEFFS, "offset")
        b = estimated_p0(0.3, 0.1, 0.0, 900.0, COEFFS, "offset")
        assert a == b

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            estimated_p0(0.3, 0.1, 0.0, 1.0, COEFFS, "x")


class TestNonlinearObserver:
    def test_initial_state(self):
        grid, _, ob, plant = setup()
        obs = ob.initial_state(plant.initial_state().field)
        assert obs.chi_hat == 0.0 and obs.delta_hat == 500.0

    def test_gain_grid_mismatch(self):
        grid = Grid(32, COEFFS.epsilon, 1.0)
        with pytest.raises(ValueError):
            NonlinearObserver(COEFFS, build_gain_profile(17, COEFFS, -1.0), AdaptationConfig(), grid)

    def test_zero_error_invariance(self):
        assert zero_error_drift("scenario-A", t_end=10.0, n_cells=64) <= 1e-10

    def test_copy_of_plant_without_injection(self):
        grid, gains, ob, plant = setup(t_end=5.0)
        zero = np.zeros(grid.n_nodes)
        ob.gains = GainProfile(gains.x_nodes, zero, zero, zero, zero, -1.0, gains.sigma, gains.epsilon)
        ob.chi_gain = 0.0
        state = plant.initial_state()
        obs = ob.initial_state(state.field)
        meas = Measurements(0.15, *plant.measurements(state))
        for n in range(1, grid.n_steps + 1):
            q0 = 0.15 * (1 + 0.05 * np.sin(n * grid.dt))
            state = plant.step(state, q0, 1e5)
            new = Measurements(q0, *plant.measurements(state))
            obs = ob.step(obs, meas, new)
            meas = new
            assert np.max(np.abs(obs.field_hat.u - state.field.u)) <= 1e-10
            assert np.max(np.abs(obs.field_hat.v - state.field.v)) <= 1e-10

    @settings(max_examples=25, deadline=None)
    @given(values=st.lists(st.tuples(st.floats(-1.0, 1.0), st.floats(-1e6, 1e6)), min_size=5, max_size=20),
           delta0=st.sampled_from([0.0, 500.0, 1000.0]))
    def test_position_stays_in_pipe(self, values, delta0):
        cfg = AdaptationConfig(gamma=1e3, chi_detection_threshold=-1.0, detection_hold=0.0, localization_start_delay=0.0)
        grid, _, ob, plant = setup(n_cells=16, config=cfg)
        state = plant.initial_state()
        obs = ob.initial_state(state.field)
        obs.delta_hat = delta0
        prev = Measurements(0.15, *plant.measurements(state))
        for dq, dp in values:
            new = Measurements(0.15 + 0.01 * dq, prev.p0 + dp, 0.15, 1e5)
            obs = ob.step(obs, prev, new)
            prev = new
            assert 0.0 <= obs.delta_hat <= COEFFS.geometry.length

    def test_inlet_pressure_monotone_in_position(self):
        # frozen adaptation, chi_hat = chi: the settled p0_hat increases with delta_hat
        leak = LeakSpec(0.02, 700.0, 0.0, 0.8)
        cfg = AdaptationConfig(localization_enabled=False)
        grid, gains, ob, plant = setup(n_cells=32, t_end=300.0, config=cfg, leak=leak)
        state = plant.initial_state()
        for _ in range(grid.n_steps):
            state = plant.step(state, 0.15, 1e5)
        meas = Measurements(0.15, *plant.measurements(state))
        ob.chi_gain = 0.0
        values = []
        for delta in np.linspace(0.0, 1000.0, 6):
            obs = ObserverState(state.field.copy(), 0.02, delta, 0.0)
            for _ in range(int(30.0 / grid.dt)):
                obs = ob.step(obs, meas, meas)
            assert obs.delta_hat == delta
            values.append(ob.p0_hat(obs))
        assert np.all(np.diff(values) > 0)


class TestLinearObserver:
    def make(self, n_cells=64, t_end=10.0, leak=None):
        grid = Grid(n_cells, COEFFS.epsilon, t_end)
        lin = linear_coeffs(COEFFS, grid.n_nodes)
        gains = build_gain_profile(grid.n_nodes, COEFFS, -1.0)
        return grid, LinearPlant(COEFFS, lin, grid, leak), LinearObserver(COEFFS, gains, AdaptationConfig(), grid, lin)

    def test_matched_start_stays_exact(self):
        grid, plant, ob = self.make()
        state, obs = plant.initial_state(), ob.initial_state()
        dy = 0.0
        for n in range(1, grid.n_steps + 1):
            dq = 0.01 * np.sin(3 * n * grid.dt)
            state = plant.step(state, dq, 0.0)
            obs = ob.step(obs, dy, state.field.u[-1], dq, 0.0, p0=plant.p0(state))
            dy = state.field.u[-1]
        assert np.max(np.abs(obs.field_hat.u - state.field.u)) <= 1e-10 * 0.15
        assert abs(obs.chi_hat) <= 1e-10 * 0.15

    def test_chi_converges_after_leak(self):
        grid, plant, ob = self.make(t_end=20.0, leak=LeakSpec(0.02, 700.0, 2.0, 0.8))
        state, obs = plant.initial_state(), ob.initial_state()
        dy = 0.0
        for _ in range(grid.n_steps):
            state = plant.step(state, 0.0, 0.0)
            obs = ob.step(obs, dy, state.field.u[-1], 0.0, 0.0, p0=plant.p0(state))
            dy = state.field.u[-1]
        assert obs.chi_hat == pytest.approx(0.02, abs=1e-6)
        assert abs(obs.field_hat.u[0] - state.field.u[0]) <= 1e-6

    def test_position_clamped_from_adversarial_start(self):
        grid, plant, ob = self.make(t_end=30.0, leak=LeakSpec(0.02, 700.0, 1.0, 0.8))
        state, obs = plant.initial_state(), ob.initial_state()
        obs.delta_hat = COEFFS.geometry.length
        dy = 0.0
        for _ in range(grid.n_steps):
            state = plant.step(state, 0.0, 0.0)
            obs = ob.step(obs, dy, state.field.u[-1], 0.0, 0.0, p0=plant.p0(state))
            dy = state.field.u[-1]
            assert 0.0 <= obs.delta_hat <= COEFFS.geometry.length

    def test_no_leak_noise_keeps_chi_small(self):
        cfg = dataclasses.replace(CFG_A, mode="linear",
                                  pipeline=dataclasses.replace(CFG_A.pipeline, leak=None))
        record = run_scenario(cfg)
        assert np.max(np.abs(record.chi_hat)) <= 1e-3 * 0.15
        assert record.detection is None

    def test_commutes_with_scaling(self):
        assert commutation_error("scenario-B", n_cells=64, t_end=25.0) <= 1e-8
