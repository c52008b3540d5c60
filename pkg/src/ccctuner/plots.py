"""Static SVG renderings of study outputs (headless matplotlib)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_histograms", "plot_curves", "plot_trajectory"]


def plot_histograms(series: dict[str, list[float]], path, xlabel: str,
                    bins: int = 40) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in series.items():
        ax.hist(values, bins=bins, alpha=0.55, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    ax.axvline(0.0, color="k", lw=0.8)
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path), format="svg")
    plt.close(fig)


def plot_curves(x, curves: dict[str, tuple], path, xlabel: str, ylabel: str) -> None:
    """Each curve is (mean, std-or-None); std renders as a shaded band."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (mean, std) in curves.items():
        ax.plot(x, mean, label=label)
        if std is not None:
            lo = [m - s for m, s in zip(mean, std)]
            hi = [m + s for m, s in zip(mean, std)]
            ax.fill_between(x, lo, hi, alpha=0.25)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path), format="svg")
    plt.close(fig)


def plot_trajectory(traj, path, vehicles=None) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    t = traj.times()
    for i in vehicles or traj.vehicles:
        ax.plot(t, traj.series[i], lw=0.8, label=f"v_{i}")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("speed [m/s]")
    ax.legend(ncol=4, fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), format="svg")
    plt.close(fig)
