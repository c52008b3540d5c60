import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccctuner import (ControllerParams, HumanParams, PlantParams, PolicyParams,
                      range_policy, resistance, saturate, speed_policy)


class TestPolicyParams:
    def test_kappa_from_defaults(self, policy):
        assert policy.kappa == pytest.approx(35.0 / (63.33 - 5.0), rel=1e-12)

    def test_from_kappa_roundtrip(self):
        p = PolicyParams.from_kappa(0.6)
        assert p.kappa == pytest.approx(0.6, rel=1e-12)
        assert p.h_go == pytest.approx(5.0 + 35.0 / 0.6, rel=1e-12)

    def test_ordering_validation(self):
        with pytest.raises(ValueError):
            PolicyParams(h_stop=70.0, h_go=63.33)

    def test_equilibrium_headway(self, policy):
        h_star = policy.equilibrium_headway(25.0)
        assert range_policy(policy, h_star) == pytest.approx(25.0, rel=1e-12)


class TestRangePolicy:
    def test_stop_distance_gives_zero(self, policy):
        assert range_policy(policy, 5.0) == 0.0

    def test_go_distance_gives_vmax(self, policy):
        assert range_policy(policy, 63.33) == pytest.approx(35.0, rel=1e-12)

    def test_midpoint_value(self):
        p = PolicyParams.from_kappa(0.6)
        assert range_policy(p, 34.165) == pytest.approx(0.6 * (34.165 - 5.0),
                                                        rel=1e-12)

    @given(st.floats(-100.0, 500.0), st.floats(-100.0, 500.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone_and_clipped(self, h1, h2):
        p = PolicyParams()
        v1, v2 = range_policy(p, h1), range_policy(p, h2)
        if h1 <= h2:
            assert v1 <= v2
        assert 0.0 <= v1 <= p.v_max


class TestSpeedPolicy:
    def test_below_limit_passthrough(self, policy):
        assert speed_policy(policy, 20.0) == 20.0

    def test_above_limit_clipped(self, policy):
        assert speed_policy(policy, 40.0) == 35.0

    def test_boundary(self, policy):
        assert speed_policy(policy, 35.0) == 35.0


class TestSaturate:
    def test_brake_floor(self, plant):
        for v in (0.0, 10.0, 30.0):
            assert saturate(plant, -10.0, v) == -6.0

    def test_power_limit_at_speed(self, plant):
        # engine power binds before the torque cap at highway speed
        expected = 300650.0 / (29641.0 * 25.0)
        assert saturate(plant, 2.0, 25.0) == pytest.approx(expected, rel=1e-12)
        assert round(expected, 4) == 0.4057

    def test_interior_passthrough(self, plant):
        assert saturate(plant, 0.3, 25.0) == 0.3

    def test_standstill_uses_torque_cap(self, plant):
        assert saturate(plant, 5.0, 0.0) == 2.0
        assert saturate(plant, 5.0, -1.0) == 2.0

    @given(st.floats(-20.0, 20.0), st.floats(0.1, 40.0))
    @settings(max_examples=80, deadline=None)
    def test_idempotent(self, u, v):
        plant = PlantParams()
        once = saturate(plant, u, v)
        assert saturate(plant, once, v) == once


class TestResistance:
    def test_standstill_value(self, plant):
        expected = 29484.0 * 9.81 * 0.006 / 29641.0
        assert resistance(plant, 0.0) == pytest.approx(expected, rel=1e-12)
        assert round(expected, 5) == 0.05855

    def test_highway_value(self, plant):
        expected = (29484.0 * 9.81 * 0.006 + 3.84 * 625.0) / 29641.0
        assert resistance(plant, 25.0) == pytest.approx(expected, rel=1e-12)
        assert round(expected, 4) == 0.1395

    def test_even_and_monotone(self, plant):
        vs = np.linspace(0.0, 40.0, 100)
        f = resistance(plant, vs)
        assert np.all(np.diff(f) > 0)
        assert np.array_equal(resistance(plant, -vs), f)


class TestPlantParams:
    def test_effective_mass_derivation(self):
        p = PlantParams(effective_mass=None)
        assert p.effective_mass == pytest.approx(
            29484.0 + 39.9 / 0.504**2, rel=1e-12)
        # the derived value agrees with the quoted one to rounding
        assert p.effective_mass == pytest.approx(29641.0, rel=1e-4)

    def test_envelope_validation(self):
        with pytest.raises(ValueError):
            PlantParams(u_min=1.0)
        with pytest.raises(ValueError):
            PlantParams(p_max=-5.0)


class TestControllerParams:
    def test_vehicle_one_required(self, policy):
        with pytest.raises(ValueError, match="vehicle 1"):
            ControllerParams(connected=(2,), betas={2: 0.5}, policy=policy)

    def test_sigma1_pinned_to_zero(self, policy):
        with pytest.raises(ValueError, match="sigma_1"):
            ControllerParams(connected=(1,), betas={1: 0.5},
                             info_delays={1: 0.5}, policy=policy)

    def test_mode_reflects_connected_set(self, policy):
        acc = ControllerParams(connected=(1,), betas={1: 0.5}, policy=policy)
        ccc = ControllerParams(connected=(1, 8), betas={1: 0.5, 8: 0.5},
                               policy=policy)
        assert acc.mode == "acc" and ccc.mode == "ccc"

    def test_negative_delay_rejected(self, policy):
        with pytest.raises(ValueError):
            ControllerParams(connected=(1, 8), betas={1: 0.5, 8: 0.5},
                             info_delays={8: -1.0}, policy=policy)


class TestHumanParams:
    def test_equilibrium_headway(self, human):
        assert human.equilibrium_headway(25.0) == 30.0

    def test_policy_continuity(self, human):
        pol = human.policy
        assert pol.kappa == pytest.approx(1.0, rel=1e-12)
        assert range_policy(pol, pol.h_go) == pytest.approx(35.0, rel=1e-12)

    def test_chain_length_floor(self):
        with pytest.raises(ValueError):
            HumanParams(chain_length=1)
