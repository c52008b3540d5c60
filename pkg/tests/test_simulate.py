import math

import numpy as np
import pytest

from ccctuner import (CollisionError, ControllerParams, GpConfig, LinkTransfer,
                      MaternKernel, PolicyParams, SpeedTrajectory,
                      energy_from_series, link_tf, resistance, sample_gp,
                      simulate_ovm_chain, simulate_truck_linear,
                      simulate_truck_nonlinear)
from ccctuner.oracle import ovm_link_tf


def const_traj(value, vehicles=(1,), n=5001, dt=0.1):
    return SpeedTrajectory(t0=0.0, dt=dt,
                           series={i: np.full(n, float(value)) for i in vehicles})


def acc_ctrl(beta1=0.5, policy=None):
    return ControllerParams(alpha=0.4, connected=(1,), betas={1: beta1},
                            policy=policy or PolicyParams())


class TestOvmChain:
    def test_equilibrium_is_fixed_point(self, human):
        lead = const_traj(25.0, vehicles=(8,))
        chain, valid = simulate_ovm_chain(lead, human, v_star=25.0)
        assert valid
        for i in range(1, 8):
            assert np.max(np.abs(chain.speed(i) - 25.0)) < 1e-12
            assert np.max(np.abs(chain.headways[i] - 30.0)) < 1e-12

    def test_fluctuations_grow_toward_vehicle_one(self, chain_datasets):
        grows = 0
        for chain in chain_datasets:
            if np.std(chain.speed(1)) > np.std(chain.speed(8)):
                grows += 1
        assert grows >= 0.9 * len(chain_datasets)

    def test_matches_linear_theory_at_small_amplitude(self, human):
        from scipy.integrate import quad
        from ccctuner import matern_psd
        k = MaternKernel(amplitude=0.01)
        lead = sample_gp(GpConfig(kernel=k, duration=2000.0, dt=0.1, seed=5),
                         vehicle=8)
        chain, _ = simulate_ovm_chain(lead, human, v_star=25.0)
        for i in (6, 3):
            links = 8 - i
            pred, _ = quad(lambda w: abs(ovm_link_tf(human, 1j * w)) ** (2 * links)
                           * matern_psd(k, w), 0.0, 25.0, limit=400)
            pred_std = math.sqrt(pred / math.pi)
            sim_std = float(np.std(chain.speed(i)))
            assert sim_std == pytest.approx(pred_std, rel=0.08)

    def test_step_refinement(self, kernel, human):
        lead = sample_gp(GpConfig(kernel=kernel, duration=500.0, dt=0.1, seed=3),
                         vehicle=8)
        coarse, _ = simulate_ovm_chain(lead, human, v_star=25.0, dt_sim=0.01)
        fine, _ = simulate_ovm_chain(lead, human, v_star=25.0, dt_sim=0.005)
        diff = np.max(np.abs(coarse.speed(1) - fine.speed(1)))
        assert diff < 1e-3

    def test_collision_flags_invalid(self, human):
        n = 2001
        lead = np.full(n, 25.0)
        lead[200:] = -20.0  # lead reverses; follower must run into it
        traj = SpeedTrajectory(t0=0.0, dt=0.1, series={8: lead})
        chain, valid = simulate_ovm_chain(traj, human, v_star=25.0)
        assert not valid

    def test_lead_index_must_match_chain(self, human):
        with pytest.raises(ValueError, match="chain"):
            simulate_ovm_chain(const_traj(25.0, vehicles=(5,)), human, v_star=25.0)


class TestTruckNonlinear:
    def test_equilibrium_energy_is_resistance_work(self, plant):
        traj, rep = simulate_truck_nonlinear(const_traj(25.0), plant, acc_ctrl(),
                                             v_star=25.0)
        assert np.max(np.abs(traj.speed(0) - 25.0)) < 1e-12
        assert rep.w == pytest.approx(500.0 * 25.0 * resistance(plant, 25.0),
                                      rel=1e-9)

    def test_burn_in_shortens_horizon(self, plant):
        _, rep = simulate_truck_nonlinear(const_traj(25.0), plant, acc_ctrl(),
                                          v_star=25.0, burn_in=100.0)
        assert rep.w == pytest.approx(400.0 * 25.0 * resistance(plant, 25.0),
                                      rel=1e-9)
        assert rep.t0 == 100.0

    def test_braking_contributes_nothing(self):
        # strictly negative drive integrates to exactly zero energy
        v = np.full(1000, 20.0)
        a = np.linspace(-3.0, -0.1, 1000)
        assert energy_from_series(v, a, 0.01, drive=a) == 0.0
        # and a braking stretch adds nothing beyond its boundary samples
        mixed = np.concatenate([np.full(500, -1.0), np.full(500, 2.0)])
        vm = np.full(1000, 20.0)
        w_mixed = energy_from_series(vm, mixed, 0.01, drive=mixed)
        w_drive = energy_from_series(vm[500:], mixed[500:], 0.01,
                                     drive=mixed[500:])
        boundary = 0.5 * 0.01 * 20.0 * 2.0  # one trapezoid at the sign change
        assert w_mixed == pytest.approx(w_drive + boundary, rel=1e-12)

    def test_collision_raises(self, plant, human, kernel):
        lead = np.full(3001, 25.0)
        lead[100:] = 0.5  # near-stop ahead
        traj = SpeedTrajectory(t0=0.0, dt=0.1, series={1: lead})
        # aggressive gains and a short initial headway force contact
        ctrl = ControllerParams(alpha=0.4, connected=(1,), betas={1: 2.0},
                                policy=PolicyParams())
        with pytest.raises(CollisionError, match="headway"):
            simulate_truck_nonlinear(traj, plant, ctrl, v_star=25.0,
                                     init=(8.0, 25.0))

    def test_acc_equals_ccc_with_singleton_set(self, plant, chain_datasets):
        data = chain_datasets[0]
        ctrl_acc = acc_ctrl(0.7)
        ctrl_ccc = ControllerParams(alpha=0.4, connected=(1,),
                                    betas={1: 0.7}, info_delays={1: 0.0},
                                    policy=PolicyParams())
        t1, r1 = simulate_truck_nonlinear(data.subset((1,)), plant, ctrl_acc,
                                          v_star=25.0)
        t2, r2 = simulate_truck_nonlinear(data.subset((1,)), plant, ctrl_ccc,
                                          v_star=25.0)
        assert np.array_equal(t1.speed(0), t2.speed(0))
        assert r1.w == r2.w

    def test_grid_refinement_energy(self, plant, chain_datasets):
        data = chain_datasets[0].subset((1,))
        _, coarse = simulate_truck_nonlinear(data, plant, acc_ctrl(), v_star=25.0,
                                             dt_sim=0.01)
        _, fine = simulate_truck_nonlinear(data, plant, acc_ctrl(), v_star=25.0,
                                           dt_sim=0.005)
        assert abs(coarse.w - fine.w) / fine.w < 0.005

    def test_energy_nonnegative(self, plant, chain_datasets):
        for data in chain_datasets[:4]:
            _, rep = simulate_truck_nonlinear(data.subset((1,)), plant,
                                              acc_ctrl(), v_star=25.0)
            assert rep.w >= 0.0


class TestTruckLinear:
    def test_zero_input_stays_zero(self, plant):
        traj, rep = simulate_truck_linear(const_traj(25.0), plant, acc_ctrl(),
                                          v_star=25.0)
        assert np.max(np.abs(traj.speed(0))) < 1e-12
        assert rep.wbar == 0.0

    def test_dc_gain_settles_to_step(self, plant):
        n = 3001
        v1 = np.full(n, 25.0)
        v1[500:] = 27.0
        traj = SpeedTrajectory(t0=0.0, dt=0.1, series={1: v1})
        out, rep = simulate_truck_linear(traj, plant, acc_ctrl(), v_star=25.0)
        target = 2.0 - np.mean(v1 - 25.0)  # centralized step's final level
        tail = out.speed(0)[-50:]
        assert np.max(np.abs(tail - target)) < 1e-3 * abs(target) + 1e-6

    def test_sinusoid_matches_link_gain(self, plant):
        omega0 = 0.5
        t = 0.1 * np.arange(8001)
        v1 = 25.0 + np.sin(omega0 * t)
        traj = SpeedTrajectory(t0=0.0, dt=0.1, series={1: v1})
        ctrl = acc_ctrl(0.5)
        out, _ = simulate_truck_linear(traj, plant, ctrl, v_star=25.0,
                                       centralize_inputs=False)
        lt = LinkTransfer(alpha=0.4, kappa=ctrl.policy.kappa,
                          sigma=plant.actuation_delay, betas={1: 0.5}, sigmas={})
        gain = abs(link_tf(lt, 1, 1j * omega0))
        tail = out.speed(0)[4000:]
        amplitude = 0.5 * (tail.max() - tail.min())
        assert amplitude == pytest.approx(gain, rel=0.01)

    def test_unstable_gains_flagged(self, plant, chain_datasets):
        ctrl = acc_ctrl(5.0)  # far beyond the admissible gain interval
        _, rep = simulate_truck_linear(chain_datasets[0].subset((1,)), plant,
                                       ctrl, v_star=25.0)
        assert "plant-unstable gains" in rep.warnings

    def test_surrogate_nonnegative(self, plant, chain_datasets):
        for data in chain_datasets[:4]:
            _, rep = simulate_truck_linear(data.subset((1,)), plant, acc_ctrl(),
                                           v_star=25.0)
            assert rep.wbar >= 0.0

    def test_ccc_uses_both_inputs(self, plant, chain_datasets):
        data = chain_datasets[0]
        ctrl = ControllerParams(alpha=0.4, connected=(1, 8),
                                betas={1: 0.3, 8: 0.9}, info_delays={8: 2.0},
                                policy=PolicyParams())
        _, rep = simulate_truck_linear(data.subset((1, 8)), plant, ctrl,
                                       v_star=25.0)
        assert rep.wbar > 0.0
