"""Exact spectra of the synthetic traffic generator.

In the synthetic scenario the farthest vehicle carries a Matern Gaussian
process and every human driver between it and the truck acts, to first
order, as one link of a linear time-invariant filter. That makes every
cross-spectrum of the observed vehicles available in closed form:

    S_ij(w) = G(jw)^(L-i) conj(G(jw))^(L-j) S_LL(w),

with G the linearized car-following link and S_LL the analytic Matern
spectrum. These are the "oracle" inputs against which the data-driven
estimators are judged.
"""

import numpy as np

from .gp import MaternKernel, matern_psd
from .spectral import SpectralEstimate
from .vehicles import HumanParams

__all__ = ["ovm_link_tf", "oracle_psd_matrix", "oracle_spectral_matrix",
           "default_oracle_grid"]


def ovm_link_tf(human: HumanParams, s):
    """Linearized transfer function of one human-driven link, follower over leader.

    The driver's reaction delay sits on the perceived headway and
    predecessor speed while the own-speed relaxation is current, giving

        G(s) = (beta_h s + alpha_h kappa_h) e^(-s sigma_h)
               / (s^2 + (alpha_h + beta_h) s + alpha_h kappa_h e^(-s sigma_h)).

    DC gain is one; with the default parameters the gain peaks near 1.2
    around 0.3 rad/s, so the chain is mildly string unstable and fluctuations
    grow toward the truck.
    """
    s = np.asarray(s, dtype=complex)
    lag = np.exp(-s * human.reaction_delay)
    num = (human.beta_h * s + human.alpha_h * human.kappa_h) * lag
    den = (s**2 + (human.alpha_h + human.beta_h) * s
           + human.alpha_h * human.kappa_h * lag)
    out = num / den
    return complex(out) if out.ndim == 0 else out


def oracle_psd_matrix(kernel: MaternKernel, human: HumanParams, indices,
                      omega: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """Two-sided cross-spectra S_ij(omega) of the synthetic chain, as arrays."""
    lead = human.chain_length
    omega = np.asarray(omega, dtype=float)
    s_lead = matern_psd(kernel, omega)
    jw = 1j * omega
    g = ovm_link_tf(human, jw)
    powers = {i: g ** (lead - i) for i in sorted(set(indices))}
    out = {}
    for i in indices:
        for j in indices:
            out[(i, j)] = powers[i] * np.conj(powers[j]) * s_lead
    return out


def default_oracle_grid(n: int, dt: float) -> np.ndarray:
    """Frequency grid matching the periodogram of an n-sample record."""
    return 2.0 * np.pi * np.arange(n // 2 + 1) / (n * dt)


def oracle_spectral_matrix(kernel: MaternKernel, human: HumanParams, indices,
                           omega: np.ndarray, dt: float,
                           n_samples: int | None = None) -> SpectralEstimate:
    """Oracle spectra packaged like an estimate (one-sided convention, 2x the
    analytic transform), so tuner and theory code consume oracle and
    data-driven inputs through one interface."""
    mats = oracle_psd_matrix(kernel, human, indices, omega)
    values = {key: 2.0 * val for key, val in mats.items()}
    return SpectralEstimate(dt=dt, omega=np.asarray(omega, dtype=float),
                            values=values, estimator="oracle",
                            n_samples=n_samples)
