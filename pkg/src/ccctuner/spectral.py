"""Periodogram and Welch estimators of (cross) power spectral densities.

Conventions, used consistently across the package:

* Cross-correlation R_xy(tau) = E[x(t+tau) y(t)]; spectra are its Fourier
  transform evaluated on omega >= 0.
* Estimates are one-sided densities: S_hat(w_k) = (2 dt / N) X_k conj(Y_k)
  on the grid w_k = 2 pi k / (N dt), k = 0..floor(N/2). Integrating a
  one-sided density with half weight on the DC and Nyquist bins recovers the
  mean square of the record exactly (discrete Parseval). The analytic
  (two-sided) transform of a correlation function corresponds to half of
  these values away from DC.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window

from .trajectory import SpeedTrajectory

__all__ = [
    "SpectralEstimate",
    "WelchConfig",
    "centralize",
    "periodogram_cross",
    "welch_cross",
    "welch_segment_starts",
    "estimate_matrix",
    "fold_weights",
    "integrate_onesided",
    "default_welch_config",
]


@dataclass
class SpectralEstimate:
    """Hermitian matrix of one-sided cross-spectra on a common frequency grid.

    ``n_samples`` records the DFT length behind the grid (segment length for
    Welch); it determines whether the last bin is a Nyquist bin and allows
    two-sided reconstruction.
    """

    dt: float
    omega: np.ndarray
    values: dict[tuple[int, int], np.ndarray]
    estimator: str = "periodogram"
    n_samples: int | None = None

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.values = {k: np.asarray(v, dtype=complex) for k, v in self.values.items()}

    @property
    def indices(self) -> list[int]:
        return sorted({i for i, _ in self.values})

    def entry(self, i: int, j: int) -> np.ndarray:
        if (i, j) in self.values:
            return self.values[(i, j)]
        if (j, i) in self.values:
            return np.conj(self.values[(j, i)])
        raise KeyError(f"no entry ({i}, {j}) in estimate over {self.indices}")

    def validate(self, atol: float = 1e-9) -> None:
        if np.any(np.diff(self.omega) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        scale = max(float(np.max(np.abs(v))) for v in self.values.values())
        scale = max(scale, 1e-300)
        for (i, j), v in self.values.items():
            other = self.values.get((j, i))
            if other is not None and not np.allclose(v, np.conj(other),
                                                     atol=atol * scale, rtol=0):
                raise ValueError(f"entries ({i},{j}) and ({j},{i}) are not conjugate")
            if i == j:
                if np.max(np.abs(v.imag)) > atol * scale:
                    raise ValueError(f"diagonal entry ({i},{i}) is not real")
                if np.min(v.real) < -atol * scale:
                    raise ValueError(f"diagonal entry ({i},{i}) is negative")

    def scaled(self, factor: float) -> "SpectralEstimate":
        return SpectralEstimate(
            dt=self.dt, omega=self.omega.copy(),
            values={k: v * factor for k, v in self.values.items()},
            estimator=self.estimator, n_samples=self.n_samples)


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int
    overlap_ratio: float = 0.5
    window_kind: str = "hamming"

    def __post_init__(self):
        if self.segment_length < 8:
            raise ValueError(f"segment_length must be >= 8, got {self.segment_length}")
        if not 0.0 <= self.overlap_ratio < 1.0:
            raise ValueError(f"overlap_ratio must be in [0, 1), got {self.overlap_ratio}")


def default_welch_config(n: int) -> WelchConfig:
    """Segment length floor(n/8) rounded up to a power of two, 50% overlap."""
    base = max(8, n // 8)
    seg = 1 << (base - 1).bit_length()
    seg = min(seg, n)
    return WelchConfig(segment_length=seg)


def centralize(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("cannot centralize an empty series")
    return x - x.mean()


def periodogram_cross(x, y, dt: float):
    """One-sided cross-periodogram of two centralized records.

    Returns (omega, s) with s_k = (2 dt / N) X_k conj(Y_k) for
    k = 0..floor(N/2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    n = x.size
    half = n // 2
    fx = np.fft.rfft(x)
    fy = np.fft.rfft(y)
    s = (fx[: half + 1] * np.conj(fy[: half + 1])) * (2.0 * dt / n)
    omega = 2.0 * np.pi * np.arange(half + 1) / (n * dt)
    return omega, s


def welch_segment_starts(n: int, cfg: WelchConfig) -> np.ndarray:
    step = max(1, int(round(cfg.segment_length * (1.0 - cfg.overlap_ratio))))
    if n < cfg.segment_length:
        raise ValueError(f"record of {n} samples is shorter than one segment "
                         f"of {cfg.segment_length}")
    return np.arange(0, n - cfg.segment_length + 1, step)


def welch_cross(x, y, dt: float, cfg: WelchConfig):
    """Averaged windowed cross-periodogram over overlapping segments.

    The window is power-normalized (divide by mean squared window value) so a
    white record keeps an unbiased level. With one full-length segment and a
    rectangular window this reproduces the plain periodogram bit for bit.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    starts = welch_segment_starts(x.size, cfg)
    m = cfg.segment_length
    if cfg.window_kind in ("rect", "rectangular", "boxcar"):
        win = np.ones(m)
    else:
        win = get_window(cfg.window_kind, m, fftbins=True)
    power = float(np.mean(win**2))
    half = m // 2
    acc = np.zeros(half + 1, dtype=complex)
    for s0 in starts:
        fx = np.fft.rfft(x[s0:s0 + m] * win)
        fy = np.fft.rfft(y[s0:s0 + m] * win)
        acc += fx[: half + 1] * np.conj(fy[: half + 1])
    scale = 2.0 * dt / (m * power * len(starts))
    omega = 2.0 * np.pi * np.arange(half + 1) / (m * dt)
    return omega, acc * scale


def estimate_matrix(traj: SpeedTrajectory, indices, estimator: str = "periodogram",
                    welch_cfg: WelchConfig | None = None) -> SpectralEstimate:
    """Full Hermitian cross-spectral matrix over the requested vehicles.

    Series are centralized before estimation; the lower triangle is filled by
    conjugation and the diagonal is kept exactly real.
    """
    indices = sorted(indices)
    missing = [i for i in indices if i not in traj.series]
    if missing:
        raise KeyError(f"trajectory lacks vehicles {missing}")
    data = {i: centralize(traj.series[i]) for i in indices}
    n = traj.n_samples
    if estimator == "periodogram":
        entry = lambda a, b: periodogram_cross(a, b, traj.dt)
        n_fft = n
    elif estimator == "welch":
        cfg = welch_cfg or default_welch_config(n)
        entry = lambda a, b: welch_cross(a, b, traj.dt, cfg)
        n_fft = cfg.segment_length
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    values: dict[tuple[int, int], np.ndarray] = {}
    omega = None
    for a_pos, i in enumerate(indices):
        for j in indices[a_pos:]:
            omega, s = entry(data[i], data[j])
            if i == j:
                s = s.real.astype(complex)
            values[(i, j)] = s
            if i != j:
                values[(j, i)] = np.conj(s)
    return SpectralEstimate(dt=traj.dt, omega=omega, values=values,
                            estimator=estimator, n_samples=n_fft)


def fold_weights(n_bins: int, n_samples: int | None) -> np.ndarray:
    """Folding multiplicities d_k mapping a two-sided DFT sum onto the
    one-sided grid: interior bins count twice, DC once, and the Nyquist bin
    (present when the DFT length is even) once."""
    d = np.full(n_bins, 2.0)
    d[0] = 1.0
    if n_samples is not None and n_samples % 2 == 0:
        d[-1] = 1.0
    return d


def integrate_onesided(est: SpectralEstimate, vehicle: int) -> float:
    """(1/2pi) integral of a one-sided PSD with exact discrete weights;
    equals the mean square of the underlying centralized record."""
    s = est.entry(vehicle, vehicle).real
    d = fold_weights(s.size, est.n_samples)
    domega = est.omega[1] - est.omega[0]
    return float(np.sum(0.5 * d * s) * domega / (2.0 * np.pi))


def write_spectral_csv(est: SpectralEstimate, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "i", "j", "re", "im", "estimator"])
        for (i, j), v in sorted(est.values.items()):
            for w, val in zip(est.omega, v):
                writer.writerow([repr(float(w)), i, j, repr(float(val.real)),
                                 repr(float(val.imag)), est.estimator])


def read_spectral_csv(path, dt: float, n_samples: int | None = None) -> SpectralEstimate:
    rows = {}
    estimator = "periodogram"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = (int(row["i"]), int(row["j"]))
            rows.setdefault(key, []).append(
                (float(row["omega"]), float(row["re"]) + 1j * float(row["im"])))
            estimator = row["estimator"]
    omega = None
    values = {}
    for key, pairs in rows.items():
        pairs.sort(key=lambda p: p[0])
        omega = np.array([p[0] for p in pairs])
        values[key] = np.array([p[1] for p in pairs])
    return SpectralEstimate(dt=dt, omega=omega, values=values,
                            estimator=estimator, n_samples=n_samples)
