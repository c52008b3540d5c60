"""Stationary Gaussian-process speed signals with Matern correlation.

The lead vehicle's speed is modeled as v* plus a zero-mean stationary GP.
Sampling uses circulant embedding of the covariance on a doubled grid, which
is exact for stationary kernels and costs O(N log N).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, kv

from .trajectory import SpeedTrajectory

__all__ = [
    "MaternKernel",
    "GpConfig",
    "CirculantEmbeddingError",
    "matern_acf",
    "matern_psd",
    "sample_gp",
]


class CirculantEmbeddingError(RuntimeError):
    """Covariance embedding is not positive semidefinite after clipping."""


@dataclass(frozen=True)
class MaternKernel:
    """Matern autocorrelation: amplitude in m/s, length scale in s."""

    amplitude: float = 1.0
    length_scale: float = 5.0
    smoothness: float = 2.5

    def __post_init__(self):
        if self.amplitude <= 0 or self.length_scale <= 0 or self.smoothness <= 0:
            raise ValueError(
                "Matern parameters must be positive, got "
                f"C={self.amplitude}, rho={self.length_scale}, nu={self.smoothness}"
            )

    def acf(self, tau):
        return matern_acf(self, tau)

    def psd(self, omega):
        return matern_psd(self, omega)


@dataclass(frozen=True)
class GpConfig:
    kernel: MaternKernel
    mean_speed: float = 25.0
    duration: float = 500.0
    dt: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.mean_speed <= 0:
            raise ValueError(f"mean_speed must be positive, got {self.mean_speed}")
        n = self.duration / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
            raise ValueError(
                f"duration/dt must be a positive integer, got {self.duration}/{self.dt}"
            )

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt))


def matern_acf(kernel: MaternKernel, tau):
    """Autocorrelation R(tau) in (m/s)^2; even in tau, R(0) = C^2.

    Half-integer smoothness 1/2, 3/2, 5/2 uses the closed forms; other values
    fall back to the Bessel-K expression, which is 0/0 at tau = 0 and is
    therefore guarded there.
    """
    c2 = kernel.amplitude**2
    nu = kernel.smoothness
    rho = kernel.length_scale
    t = np.abs(np.asarray(tau, dtype=float))
    scalar = t.ndim == 0
    t = np.atleast_1d(t)

    if nu == 0.5:
        r = c2 * np.exp(-t / rho)
    elif nu == 1.5:
        z = math.sqrt(3.0) * t / rho
        r = c2 * (1.0 + z) * np.exp(-z)
    elif nu == 2.5:
        z = math.sqrt(5.0) * t / rho
        r = c2 * (1.0 + z + z**2 / 3.0) * np.exp(-z)
    else:
        z = math.sqrt(2.0 * nu) * t / rho
        r = np.full_like(t, c2)
        nz = z > 0
        zs = z[nz]
        r[nz] = c2 * (2.0 ** (1.0 - nu) / gamma(nu)) * zs**nu * kv(nu, zs)
    return float(r[0]) if scalar else r


def matern_psd(kernel: MaternKernel, omega):
    """Spectral density S(omega) = integral of R(tau) exp(-j omega tau) dtau.

    One-dimensional Matern spectrum, proportional to
    (2 nu / rho^2 + omega^2)^-(nu + 1/2); satisfies
    (1/2pi) * integral over the real line = C^2.
    """
    nu = kernel.smoothness
    rho = kernel.length_scale
    c2 = kernel.amplitude**2
    w = np.asarray(omega, dtype=float)
    const = (
        c2
        * 2.0
        * math.sqrt(math.pi)
        * gamma(nu + 0.5)
        * (2.0 * nu) ** nu
        / (gamma(nu) * rho ** (2.0 * nu))
    )
    out = const * (2.0 * nu / rho**2 + w**2) ** (-(nu + 0.5))
    return float(out) if np.ndim(omega) == 0 else out


def _circulant_eigenvalues(kernel: MaternKernel, n: int, dt: float):
    # first row of the circulant embedding on the doubled grid
    lags = np.arange(n)
    r = matern_acf(kernel, lags * dt)
    row = np.concatenate([r, r[n - 2:0:-1]])  # length 2n - 2
    eig = np.fft.fft(row).real
    neg = eig[eig < 0]
    if neg.size:
        deficit = -neg.sum()
        trace = float(np.sum(np.abs(eig)))
        if deficit > 1e-8 * trace:
            raise CirculantEmbeddingError(
                "circulant embedding not positive semidefinite: clipped "
                f"eigenvalue mass {deficit:.3e} exceeds 1e-8 of trace {trace:.3e}"
            )
        eig = np.clip(eig, 0.0, None)
    return eig


def sample_gp(config: GpConfig, vehicle: int = 1) -> SpeedTrajectory:
    """Draw one speed record v(t_k) = v* + GP sample, deterministic in the seed."""
    n = config.n_samples
    eig = _circulant_eigenvalues(config.kernel, n, config.dt)
    m = eig.size
    rng = np.random.default_rng(config.seed)
    noise = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    spec = np.sqrt(eig / (2.0 * m)) * noise
    path = np.fft.fft(spec)
    sample = math.sqrt(2.0) * path.real[:n]
    return SpeedTrajectory(
        t0=0.0, dt=config.dt, series={vehicle: config.mean_speed + sample}
    )
