import cmath
import math

import numpy as np
import pytest

from ccctuner import (InfeasibleRegionError, LinkTransfer, PoleError, char_fn,
                      find_characteristic_roots, link_tf,
                      rightmost_root_oracle, stability_region)


def make_lt(alpha=0.4, kappa=0.6, sigma=0.6, betas=None, sigmas=None):
    return LinkTransfer(alpha=alpha, kappa=kappa, sigma=sigma,
                        betas=betas or {1: 0.5}, sigmas=sigmas or {})


class TestCharFn:
    def test_dc_value(self):
        assert char_fn(make_lt(), 0.0) == pytest.approx(0.24, rel=1e-12)

    def test_delay_free_is_quadratic(self):
        lt = make_lt(sigma=0.0, betas={1: 0.7})
        for s in (0.3 + 1j, -2.0 + 0.5j, 1j):
            quad = s * s + (0.4 + 0.7) * s + 0.24
            assert char_fn(lt, s) == pytest.approx(quad, rel=1e-12)

    def test_real_coefficient_symmetry(self):
        lt = make_lt(betas={1: 0.5, 8: 0.9}, sigmas={8: 2.0})
        for s in (0.2 + 1.7j, -1.0 + 3.0j):
            assert char_fn(lt, np.conj(s)) == pytest.approx(
                np.conj(char_fn(lt, s)), rel=1e-12)


class TestLinkTf:
    def test_dc_gains_sum_to_one(self, rng):
        for _ in range(100):
            alpha = rng.uniform(0.1, 1.0)
            kappa = rng.uniform(0.3, 1.0)
            sigma = rng.uniform(0.1, 1.0)
            betas = {1: rng.uniform(0.0, 1.5), 8: rng.uniform(0.0, 1.5)}
            sigmas = {8: rng.uniform(0.0, 8.0)}
            lt = LinkTransfer(alpha=alpha, kappa=kappa, sigma=sigma,
                              betas=betas, sigmas=sigmas)
            total = sum(link_tf(lt, i, 0.0) for i in lt.indices)
            assert abs(total - 1.0) < 1e-12

    def test_magnitude_independent_of_info_delay(self):
        omega = np.linspace(0.01, 5.0, 200)
        base = make_lt(betas={1: 0.4, 8: 0.8}, sigmas={8: 0.0})
        delayed = make_lt(betas={1: 0.4, 8: 0.8}, sigmas={8: 3.7})
        g0 = np.abs(link_tf(base, 8, 1j * omega))
        g1 = np.abs(link_tf(delayed, 8, 1j * omega))
        assert np.allclose(g0, g1, rtol=1e-12)

    def test_conjugate_symmetry_on_axis(self):
        lt = make_lt(betas={1: 0.4, 8: 0.8}, sigmas={8: 2.0})
        omega = np.linspace(0.1, 4.0, 50)
        for i in (1, 8):
            plus = link_tf(lt, i, 1j * omega)
            minus = link_tf(lt, i, -1j * omega)
            assert np.allclose(minus, np.conj(plus), rtol=1e-12)

    def test_pole_error_at_characteristic_root(self):
        lt = make_lt(sigma=0.0, betas={1: 0.5})
        disc = cmath.sqrt(complex((0.4 + 0.5) ** 2 - 4 * 0.24))
        root = (-(0.4 + 0.5) + disc) / 2.0
        assert abs(char_fn(lt, root)) < 1e-12
        with pytest.raises(PoleError):
            link_tf(lt, 1, root)

    def test_unknown_vehicle(self):
        with pytest.raises(KeyError):
            link_tf(make_lt(), 3, 1j)


class TestStabilityRegion:
    def test_default_interval(self):
        region = stability_region(0.4, 0.6, 0.6)
        # roots of 0.24 = w^2 cos(0.6 w) on (0, pi/1.2)
        g = lambda w: w * w * math.cos(0.6 * w) - 0.24
        assert abs(g(region.omega_lower)) < 1e-8
        assert abs(g(region.omega_upper)) < 1e-8
        assert 0 < region.omega_lower < region.omega_upper < math.pi / 1.2
        assert region.beta_sum_lower == pytest.approx(
            region.omega_lower * math.sin(region.omega_lower * 0.6) - 0.4)
        assert region.beta_sum_upper == pytest.approx(
            region.omega_upper * math.sin(region.omega_upper * 0.6) - 0.4)

    def test_half_open_membership(self):
        region = stability_region(0.4, 0.6, 0.6)
        assert region.contains(region.beta_sum_lower)
        assert not region.contains(region.beta_sum_upper)

    def test_independent_of_info_delays(self):
        # the region depends only on (alpha, kappa, sigma); delayed links
        # with any sigma_i classify identically
        region = stability_region(0.4, 0.6, 0.6)
        for sig_l in (0.0, 2.0, 7.5):
            lt = make_lt(betas={1: 0.5, 8: 1.0}, sigmas={8: sig_l})
            assert region.contains(lt.beta_sum)
            assert rightmost_root_oracle(lt) < 0.0

    def test_infeasible_reports_maximum(self):
        with pytest.raises(InfeasibleRegionError, match="max of w"):
            stability_region(10.0, 10.0, 1.0)

    def test_parameter_domain(self):
        with pytest.raises(ValueError):
            stability_region(-0.1, 0.6, 0.6)


class TestRootOracle:
    def test_delay_free_quadratic_roots_recovered(self):
        lt = make_lt(sigma=1e-9, betas={1: 0.3})
        a, b, c = 1.0, 0.7, 0.24
        disc = cmath.sqrt(complex(b * b - 4 * a * c))
        expected = sorted([(-b + disc) / 2, (-b - disc) / 2],
                          key=lambda z: z.imag)
        roots = sorted(find_characteristic_roots(lt, re_range=(-3.0, 1.0),
                                                 im_range=(-2.0, 2.0)),
                       key=lambda z: z.imag)
        assert len(roots) == 2
        for r, e in zip(roots, expected):
            assert abs(r - e) < 1e-8

    def test_stable_interior_point(self):
        lt = make_lt(betas={1: 0.8})
        assert rightmost_root_oracle(lt) < 0.0

    def test_unstable_above_upper_bound(self):
        region = stability_region(0.4, 0.6, 0.6)
        beta = region.beta_sum_upper + 0.3
        lt = make_lt(betas={1: beta})
        assert rightmost_root_oracle(lt) > 0.0

    def test_agreement_with_region_formula(self, rng):
        """Interval membership and root signs agree on non-boundary draws."""
        region = stability_region(0.4, 0.6, 0.6)
        checked = 0
        for _ in range(60):
            beta = rng.uniform(region.beta_sum_lower - 1.0,
                               region.beta_sum_upper + 1.0)
            margin = region.margin(beta)
            if abs(margin) < 1e-3:
                continue
            lt = make_lt(betas={1: beta})
            rightmost = rightmost_root_oracle(lt)
            assert (rightmost < 0.0) == (margin > 0.0), (beta, rightmost)
            checked += 1
        assert checked >= 50

    def test_roots_are_actual_zeros(self):
        lt = make_lt(betas={1: 0.5, 8: 1.2}, sigmas={8: 1.5})
        roots = find_characteristic_roots(lt)
        assert roots, "expected at least one root in the default box"
        for r in roots:
            assert abs(char_fn(lt, r)) < 1e-9 * (1 + abs(r)) ** 2
