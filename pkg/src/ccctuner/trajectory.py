"""Uniformly sampled multi-vehicle speed records and their CSV interchange.

The on-disk format is the contract shared by every tool in the package:
header ``t,v_1,...,v_L``, time in seconds with uniform spacing, speeds in
m/s. Vehicle 1 is the one immediately ahead of the truck; larger indices are
farther upstream.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SpeedTrajectory", "read_trajectory_csv", "write_trajectory_csv"]


@dataclass
class SpeedTrajectory:
    t0: float
    dt: float
    series: dict[int, np.ndarray]
    headways: dict[int, np.ndarray] | None = field(default=None)
    accelerations: dict[int, np.ndarray] | None = field(default=None)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.series:
            raise ValueError("trajectory needs at least one vehicle series")
        lengths = {len(v) for v in self.series.values()}
        if self.headways:
            lengths |= {len(v) for v in self.headways.values()}
        if self.accelerations:
            lengths |= {len(v) for v in self.accelerations.values()}
        if len(lengths) != 1:
            raise ValueError(f"series lengths differ: {sorted(lengths)}")
        self.series = {i: np.asarray(v, dtype=float) for i, v in self.series.items()}

    @property
    def n_samples(self) -> int:
        return len(next(iter(self.series.values())))

    @property
    def vehicles(self) -> list[int]:
        return sorted(self.series)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def speed(self, vehicle: int) -> np.ndarray:
        return self.series[vehicle]

    def subset(self, vehicles) -> "SpeedTrajectory":
        return SpeedTrajectory(
            t0=self.t0, dt=self.dt,
            series={i: self.series[i] for i in vehicles},
        )

    def resample(self, dt_new: float) -> "SpeedTrajectory":
        """Linear interpolation onto a new uniform grid spanning the record."""
        t_old = self.times()
        n_new = int(np.floor((t_old[-1] - self.t0) / dt_new)) + 1
        t_new = self.t0 + dt_new * np.arange(n_new)
        return SpeedTrajectory(
            t0=self.t0, dt=dt_new,
            series={i: np.interp(t_new, t_old, v) for i, v in self.series.items()},
        )


def write_trajectory_csv(traj: SpeedTrajectory, path) -> None:
    vehicles = traj.vehicles
    times = traj.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"v_{i}" for i in vehicles])
        cols = [traj.series[i] for i in vehicles]
        for k in range(traj.n_samples):
            writer.writerow([repr(float(times[k]))] + [repr(float(c[k])) for c in cols])


class TrajectoryFormatError(ValueError):
    pass


def read_trajectory_csv(path) -> SpeedTrajectory:
    """Read the interchange CSV; exact inverse of :func:`write_trajectory_csv`.

    Requires a strictly uniform time base (use harness.ingest_external for
    tolerant ingestion of third-party files).
    """
    if isinstance(path, io.TextIOBase):
        fh = path
        rows = list(csv.reader(fh))
    else:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    if not rows:
        raise TrajectoryFormatError(f"{path}: empty file")
    header = rows[0]
    if header[0] != "t" or any(not c.startswith("v_") for c in header[1:]):
        raise TrajectoryFormatError(f"{path}: header must be t,v_1,... got {header}")
    vehicles = [int(c[2:]) for c in header[1:]]
    data = np.array([[float(x) for x in row] for row in rows[1:]])
    if data.shape[0] < 2:
        raise TrajectoryFormatError(f"{path}: need at least two samples")
    t = data[:, 0]
    dts = np.diff(t)
    dt = float(np.median(dts))
    snapped = round(dt, 12)  # absorb accumulated representation ulps
    if abs(snapped - dt) <= 1e-9 * max(1.0, abs(dt)):
        dt = snapped
    if np.any(np.abs(dts - dt) > 1e-9 * max(1.0, abs(dt))):
        raise TrajectoryFormatError(f"{path}: time base is not uniform")
    series = {v: data[:, j + 1] for j, v in enumerate(vehicles)}
    return SpeedTrajectory(t0=float(t[0]), dt=dt, series=series)
