import math

import numpy as np
import pytest

from ccctuner import (ControllerParams, GpConfig, LinkTransfer, MaternKernel,
                      PlantParams, PolicyParams, SpectralEstimate,
                      SpeedTrajectory, expected_energy, matern_psd, sample_gp,
                      simulate_truck_linear, speed_variance, theta_squared,
                      theta_squared_quad)
from ccctuner.oracle import default_oracle_grid, oracle_spectral_matrix
from ccctuner.tuner import TuneProblem, objective


def zero_estimate(indices=(1,), n=2001, dt=0.1):
    omega = default_oracle_grid(2 * (n - 1), dt)[:n]
    values = {(i, j): np.zeros(n, dtype=complex) for i in indices for j in indices}
    return SpectralEstimate(dt=dt, omega=omega, values=values,
                            estimator="oracle", n_samples=None)


def matern_estimate(kernel, n=5000, dt=0.1):
    omega = default_oracle_grid(n, dt)
    values = {(1, 1): (2.0 * matern_psd(kernel, omega)).astype(complex)}
    return SpectralEstimate(dt=dt, omega=omega, values=values,
                            estimator="oracle", n_samples=n)


def acc_lt(beta1=0.5, sigma=0.4):
    return LinkTransfer(alpha=0.4, kappa=0.6, sigma=sigma, betas={1: beta1},
                        sigmas={})


class TestThetaSquared:
    def test_zero_spectra(self):
        assert theta_squared(acc_lt(), zero_estimate()) == 0.0

    def test_single_bin_spike(self):
        est = zero_estimate()
        omega = est.omega
        k0 = 200
        domega = omega[1] - omega[0]
        power = 0.8  # one-sided integrated power of the spike
        vals = dict(est.values)
        spike = np.zeros_like(omega, dtype=complex)
        spike[k0] = power / domega
        vals[(1, 1)] = spike
        est = SpectralEstimate(dt=est.dt, omega=omega, values=vals,
                               estimator="oracle")
        lt = acc_lt()
        from ccctuner import link_tf
        t1 = link_tf(lt, 1, 1j * omega[k0])
        expected = omega[k0] ** 2 * abs(t1) ** 2 * power / (2.0 * math.pi)
        assert theta_squared(lt, est) == pytest.approx(expected, rel=1e-12)

    def test_non_hermitian_rejected(self):
        est = zero_estimate(indices=(1, 8))
        vals = dict(est.values)
        vals[(1, 1)] = np.ones_like(est.omega, dtype=complex)
        vals[(8, 8)] = np.ones_like(est.omega, dtype=complex)
        vals[(1, 8)] = np.full(est.omega.size, 1 + 1j)
        vals[(8, 1)] = np.full(est.omega.size, 1 + 1j)
        bad = SpectralEstimate(dt=est.dt, omega=est.omega, values=vals)
        lt = LinkTransfer(alpha=0.4, kappa=0.6, sigma=0.4,
                          betas={1: 0.3, 8: 0.5}, sigmas={8: 1.0})
        with pytest.raises(ValueError):
            theta_squared(lt, bad)

    def test_grid_matches_adaptive_quadrature(self, kernel):
        lt = acc_lt(0.8)
        grid_val = theta_squared(lt, matern_estimate(kernel, n=40000))
        quad_val = theta_squared_quad(
            lt, lambda w: {(1, 1): matern_psd(kernel, w)},
            omega_max=25.0, smoothness=kernel.smoothness)
        assert grid_val == pytest.approx(quad_val, rel=1e-4)

    def test_matches_time_domain_variance(self, kernel, plant):
        """Frequency-domain acceleration variance against a 5000 s run."""
        lt = acc_lt(0.6, sigma=plant.actuation_delay)
        th2 = theta_squared_quad(lt, lambda w: {(1, 1): matern_psd(kernel, w)},
                                 omega_max=25.0, smoothness=2.5)
        ctrl = ControllerParams(alpha=0.4, connected=(1,), betas={1: 0.6},
                                policy=PolicyParams.from_kappa(0.6))
        samples = []
        for seed in (77, 78):
            traj = sample_gp(GpConfig(kernel=kernel, duration=5000.0, dt=0.1,
                                      seed=seed))
            out, _ = simulate_truck_linear(traj, plant, ctrl, v_star=25.0)
            samples.append(out.accelerations[0][200:].var())
        assert np.mean(samples) == pytest.approx(th2, rel=0.05)

    def test_continuity_in_info_delay(self, kernel, human):
        omega = default_oracle_grid(5000, 0.1)
        est = oracle_spectral_matrix(kernel, human, [1, 8], omega, dt=0.1,
                                     n_samples=5000)
        base = 2.0
        deltas = [0.1, 0.01, 0.001]
        diffs = []
        for d in deltas:
            a = LinkTransfer(alpha=0.4, kappa=0.6, sigma=0.4,
                             betas={1: 0.4, 8: 0.9}, sigmas={8: base})
            b = LinkTransfer(alpha=0.4, kappa=0.6, sigma=0.4,
                             betas={1: 0.4, 8: 0.9}, sigmas={8: base + d})
            diffs.append(abs(theta_squared(lt=b, est=est)
                             - theta_squared(lt=a, est=est)))
        assert diffs[0] > diffs[1] > diffs[2]
        assert diffs[2] < 1e-3 * theta_squared(a, est)


class TestSpeedVariance:
    def test_zero_spectra(self):
        assert speed_variance(acc_lt(), zero_estimate()) == 0.0

    def test_scaling_linearity(self, kernel):
        lt = acc_lt(0.7)
        est = matern_estimate(kernel)
        v1 = speed_variance(lt, est)
        v3 = speed_variance(lt, est.scaled(3.0))
        assert v3 == pytest.approx(3.0 * v1, rel=1e-12)

    def test_matches_simulated_variance(self, kernel, plant):
        lt = acc_lt(0.6, sigma=plant.actuation_delay)
        var_pred = speed_variance(lt, matern_estimate(kernel, n=40000))
        ctrl = ControllerParams(alpha=0.4, connected=(1,), betas={1: 0.6},
                                policy=PolicyParams.from_kappa(0.6))
        samples = []
        for seed in (121, 122, 123):
            traj = sample_gp(GpConfig(kernel=kernel, duration=5000.0, dt=0.1,
                                      seed=seed))
            out, _ = simulate_truck_linear(traj, plant, ctrl, v_star=25.0)
            samples.append(out.speed(0)[500:].var())
        assert np.mean(samples) == pytest.approx(var_pred, rel=0.06)


class TestExpectedEnergy:
    def test_zero_theta(self):
        assert expected_energy(25.0, 500.0, 0.0) == 0.0

    def test_formula_value(self):
        assert expected_energy(25.0, 100.0, 0.1) == pytest.approx(
            100.0 * 25.0 / math.sqrt(2 * math.pi) * 0.1, rel=1e-12)
        assert round(expected_energy(25.0, 100.0, 0.1), 2) == 99.74

    def test_linear_in_horizon(self):
        assert expected_energy(25.0, 1000.0, 0.3) == pytest.approx(
            2.0 * expected_energy(25.0, 500.0, 0.3), rel=1e-12)

    def test_monte_carlo_gaussian_moments(self):
        # E[v g(vdot)] for independent v ~ N(v*, s^2), vdot ~ N(0, theta^2)
        rng = np.random.default_rng(4242)
        v_star, s, theta, horizon = 25.0, 1.4, 0.1, 100.0
        n = 400_000
        v = rng.normal(v_star, s, size=n)
        vdot = rng.normal(0.0, theta, size=n)
        mc = horizon * np.mean(v * np.maximum(vdot, 0.0))
        assert expected_energy(v_star, horizon, theta) == pytest.approx(
            mc, rel=0.02)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            expected_energy(25.0, -1.0, 0.1)
        with pytest.raises(ValueError):
            expected_energy(25.0, 1.0, -0.1)


class TestObjectiveBookkeeping:
    def test_theta_proportional_to_tuner_objective(self, chain_datasets):
        """The discrete tuner objective and the trapezoid moment are the same
        sum up to the exact grid factor domega / (4 pi)."""
        from ccctuner import estimate_matrix
        est = estimate_matrix(chain_datasets[0], [1, 8])
        problem = TuneProblem.from_estimate(0.4, 0.6, 0.4, (1, 8), est)
        betas = {1: 0.45, 8: 1.1}
        sigmas = {8: 1.75}
        j_val = objective(problem, betas, sigmas)
        lt = LinkTransfer(alpha=0.4, kappa=0.6, sigma=0.4, betas=betas,
                          sigmas=sigmas)
        th2 = theta_squared(lt, est)
        domega = est.omega[1] - est.omega[0]
        assert th2 == pytest.approx(j_val * domega / (4.0 * math.pi), rel=1e-9)
