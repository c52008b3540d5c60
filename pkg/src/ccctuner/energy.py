"""Analytic moments of the closed loop and the expected surrogate energy.

The truck's speed perturbation is the sum of filtered stationary Gaussian
inputs, so its acceleration variance theta^2 is a frequency integral of the
omega^2-weighted closed-loop spectra; the expected surrogate energy over a
horizon is then (t_f - t0) v* theta / sqrt(2 pi).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .freqdom import LinkTransfer, link_tf
from .spectral import SpectralEstimate, fold_weights

__all__ = [
    "MomentSummary",
    "theta_squared",
    "theta_squared_quad",
    "speed_variance",
    "expected_energy",
]


@dataclass(frozen=True)
class MomentSummary:
    speed_variance: float
    accel_variance: float
    v_star: float
    horizon: float

    @property
    def expected_surrogate_energy(self) -> float:
        return expected_energy(self.v_star, self.horizon,
                               math.sqrt(self.accel_variance))


def _weighted_moment(lt: LinkTransfer, est: SpectralEstimate, power: int) -> float:
    est.validate()
    indices = lt.indices
    for i in indices:
        for j in indices:
            est.entry(i, j)  # raises KeyError when the estimate lacks a pair
    omega = est.omega
    if np.any(np.diff(omega) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    jw = 1j * omega
    tf = {i: link_tf(lt, i, jw) for i in indices}
    q = np.zeros_like(omega, dtype=complex)
    for i in indices:
        for j in indices:
            q += tf[i] * np.conj(tf[j]) * est.entry(i, j)
    scale = float(np.max(np.abs(q))) or 1.0
    resid = float(np.max(np.abs(q.imag)))
    if resid > 1e-9 * scale:
        raise ValueError(
            f"spectral sum has imaginary residue {resid:.3e} (scale {scale:.3e}); "
            "input matrix is not Hermitian")
    d = fold_weights(omega.size, est.n_samples)
    domega = omega[1] - omega[0]
    integrand = omega**power * q.real
    # trapezoid on the uniform grid, written through the fold weights so it
    # stays exactly proportional to the tuner's discrete objective
    return float(np.sum(d * integrand) * domega / (4.0 * np.pi))


def theta_squared(lt: LinkTransfer, est: SpectralEstimate) -> float:
    """Acceleration variance from gridded spectra (trapezoid quadrature)."""
    return _weighted_moment(lt, est, power=2)


def speed_variance(lt: LinkTransfer, est: SpectralEstimate) -> float:
    """Speed-perturbation variance: the omega^0-weighted analogue."""
    return _weighted_moment(lt, est, power=0)


def theta_squared_quad(lt: LinkTransfer, psd_matrix, omega_max: float = 20.0,
                       smoothness: float | None = None,
                       quad_limit: int = 400) -> float:
    """Acceleration variance by adaptive quadrature of analytic spectra.

    ``psd_matrix(omega)`` must return the two-sided cross-spectral matrix as
    a dict {(i, j): value}. A decay-based bound for the tail beyond
    ``omega_max`` is added when the kernel smoothness is supplied (spectra
    falling off like omega^-(2 nu + 1)).
    """
    indices = lt.indices

    def integrand(w):
        jw = 1j * w
        tf = {i: link_tf(lt, i, jw) for i in indices}
        mat = psd_matrix(w)
        total = 0.0 + 0.0j
        for i in indices:
            for j in indices:
                total += tf[i] * np.conj(tf[j]) * mat[(i, j)]
        return w * w * total.real

    val, _ = quad(integrand, 0.0, omega_max, limit=quad_limit)
    tail = 0.0
    if smoothness is not None:
        # past omega_max, |T|^2 ~ 1/w^2 and S ~ w^-(2 nu + 1); bounding the
        # integrand by a power law matched at the edge over-covers the tail
        edge = abs(integrand(omega_max))
        decay = 2.0 * smoothness - 1.0
        if decay > 0:
            tail = edge * omega_max / decay
    return (val + tail) / math.pi


def expected_energy(v_star: float, horizon: float, theta: float) -> float:
    """Expected surrogate energy per unit mass: (t_f - t0) v* theta / sqrt(2 pi)."""
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if theta < 0:
        raise ValueError(f"theta must be nonnegative, got {theta}")
    return horizon * v_star / math.sqrt(2.0 * math.pi) * theta
