"""Minimize the spectral energy objective over gains and information delays.

The objective is the omega^2-weighted quadratic form of the link transfer
functions against the (cross-)spectral matrix; with periodogram input it
coincides with summing omega_k^2 |sum_i T_i V_i|^2 over the DFT bins, folded
onto the one-sided grid. Gains outside the plant-stable interval are
rejected. The search runs a coarse delay grid crossed with a gain grid and
then polishes the gains with a Nelder-Mead simplex at the best delay cells.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .freqdom import LinkTransfer, StabilityRegion, stability_region
from .spectral import SpectralEstimate, fold_weights

__all__ = ["TuneProblem", "TuneResult", "objective", "tune", "delay_sweep"]

PENALTY = 1e12


@dataclass(frozen=True)
class TuneProblem:
    """Search specification: what to tune, against which spectra."""

    alpha: float
    kappa: float
    actuation_delay: float
    indices: tuple[int, ...]
    spectra: SpectralEstimate
    region: StabilityRegion
    sigma_max: float = 6.0
    sigma_step: float = 0.25
    beta_box: tuple[float, float] = (0.0, 2.0)
    beta_grid_points: int = 9
    refine_cells: int = 3
    folding: str = "one-sided"

    def __post_init__(self):
        idx = tuple(sorted(set(self.indices)))
        object.__setattr__(self, "indices", idx)
        if 1 not in idx:
            raise ValueError("connected set must contain vehicle 1")
        for i in idx:
            self.spectra.entry(i, i)
        if self.sigma_step <= 0:
            raise ValueError("sigma grid resolution must be positive")
        if self.folding not in ("one-sided", "two-sided"):
            raise ValueError(f"unknown folding {self.folding!r}")

    @classmethod
    def from_estimate(cls, alpha, kappa, actuation_delay, indices, est,
                      **kwargs):
        region = stability_region(alpha, kappa, actuation_delay)
        return cls(alpha=alpha, kappa=kappa, actuation_delay=actuation_delay,
                   indices=tuple(indices), spectra=est, region=region, **kwargs)

    def link_transfer(self, betas: dict[int, float],
                      sigmas: dict[int, float]) -> LinkTransfer:
        return LinkTransfer(alpha=self.alpha, kappa=self.kappa,
                            sigma=self.actuation_delay, betas=betas,
                            sigmas=sigmas)


@dataclass(frozen=True)
class TuneResult:
    alpha: float
    betas: dict[int, float]
    sigmas: dict[int, float]
    objective: float
    feasibility_margin: float
    estimator: str

    @property
    def beta_sum(self) -> float:
        return float(sum(self.betas.values()))

    def to_json(self) -> str:
        return json.dumps({
            "alpha": self.alpha,
            "betas": {str(k): v for k, v in self.betas.items()},
            "sigmas": {str(k): v for k, v in self.sigmas.items()},
            "J": self.objective,
            "estimator": self.estimator,
            "feasibility_margin": self.feasibility_margin,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TuneResult":
        d = json.loads(text)
        return cls(alpha=d["alpha"],
                   betas={int(k): v for k, v in d["betas"].items()},
                   sigmas={int(k): v for k, v in d["sigmas"].items()},
                   objective=d["J"], estimator=d["estimator"],
                   feasibility_margin=d["feasibility_margin"])


def _grid_arrays(problem: TuneProblem):
    """Frequencies, fold weights and spectra rearranged for the kernels.

    The two-sided variant reconstructs the full DFT grid: upper bins carry
    conjugated spectra but are evaluated at their literal (super-Nyquist)
    frequencies, matching a plain sum over all DFT bins.
    """
    est = problem.spectra
    omega = est.omega
    if problem.folding == "one-sided":
        weights = fold_weights(omega.size, est.n_samples) * omega**2
        return omega, weights, {key: est.entry(*key) for key in
                                [(i, j) for i in problem.indices
                                 for j in problem.indices]}
    if est.n_samples is None:
        raise ValueError("two-sided folding needs the DFT length behind the grid")
    n = est.n_samples
    k_upper = np.arange(omega.size, n)
    domega = omega[1] - omega[0]
    omega_full = np.concatenate([omega, k_upper * domega])
    values = {}
    for i in problem.indices:
        for j in problem.indices:
            v = est.entry(i, j)
            mirror = np.conj(v[(n - k_upper)])
            values[(i, j)] = np.concatenate([v, mirror])
    return omega_full, omega_full**2, values


def objective(problem: TuneProblem, betas: dict[int, float],
              sigmas: dict[int, float] | None = None) -> float:
    """J for one candidate; evaluable anywhere, feasibility handled elsewhere."""
    sigmas = dict(sigmas or {})
    omega, weights, values = _grid_arrays(problem)
    return _objective_arrays(problem, omega, weights, values,
                             np.array([betas[i] for i in problem.indices]),
                             np.array([sigmas.get(i, 0.0) for i in problem.indices]))


def _objective_arrays(problem, omega, weights, values, beta_vec, sigma_vec):
    jw = 1j * omega
    d = (jw**2 * np.exp(jw * problem.actuation_delay)
         + (problem.alpha + beta_vec.sum()) * jw
         + problem.alpha * problem.kappa)
    total = np.zeros_like(omega)
    nums = []
    for pos, i in enumerate(problem.indices):
        if i == 1:
            nums.append(beta_vec[pos] * jw + problem.alpha * problem.kappa)
        else:
            nums.append(beta_vec[pos] * jw * np.exp(-jw * sigma_vec[pos]))
    for a, i in enumerate(problem.indices):
        for b, j in enumerate(problem.indices):
            total = total + (nums[a] * np.conj(nums[b]) * values[(i, j)]).real
    return float(np.sum(weights * total / np.abs(d) ** 2))


def _penalized(problem, j_val, beta_vec):
    margin = problem.region.margin(float(np.sum(beta_vec)))
    lo, hi = problem.beta_box
    box_violation = float(np.sum(np.maximum(lo - beta_vec, 0.0)
                                 + np.maximum(beta_vec - hi, 0.0)))
    if margin < 0.0 or not problem.region.contains(float(np.sum(beta_vec))):
        return PENALTY * (1.0 - margin + box_violation)
    if box_violation > 0.0:
        return PENALTY * (1.0 + box_violation)
    return j_val


def _grid_objective(problem, omega, weights, values, beta_grid, sigma_other):
    """Objective over the gain grid at one delay cell, via the fast kernels."""
    idx = problem.indices
    if len(idx) == 1:
        s11 = values[(1, 1)].real
        exp_s = np.exp(1j * omega * problem.actuation_delay)
        return _kernels.objective_single_grid(
            weights, omega, s11, exp_s.real, exp_s.imag,
            problem.alpha, problem.kappa, beta_grid)
    if len(idx) == 2:
        other = idx[1]
        s11 = values[(1, 1)].real
        sll = values[(other, other)].real
        s1l = values[(1, other)]
        exp_s = np.exp(1j * omega * problem.actuation_delay)
        phase = np.exp(-1j * omega * sigma_other)
        return _kernels.objective_pair_grid(
            weights, omega, s11, sll, s1l.real, s1l.imag,
            exp_s.real, exp_s.imag, problem.alpha, problem.kappa,
            beta_grid, beta_grid, phase.real, phase.imag)
    # general fallback: loop candidates through the array objective
    n = beta_grid.size
    shape = (n,) * len(idx)
    out = np.empty(shape)
    sig = np.array([0.0 if i == 1 else sigma_other for i in idx])
    for flat, combo in enumerate(np.ndindex(shape)):
        bvec = np.array([beta_grid[c] for c in combo])
        out[combo] = _objective_arrays(problem, omega, weights, values, bvec, sig)
    return out


def _simplex_refine(problem, omega, weights, values, beta0, sigma_other):
    idx = problem.indices
    sig_vec = np.array([0.0 if i == 1 else sigma_other for i in idx])

    def fun(beta_vec):
        j_val = _objective_arrays(problem, omega, weights, values,
                                  np.asarray(beta_vec), sig_vec)
        return _penalized(problem, j_val, np.asarray(beta_vec))

    res = minimize(fun, np.asarray(beta0), method="Nelder-Mead",
                   options={"fatol": 1e-6 * max(abs(fun(beta0)), 1e-30),
                            "xatol": 1e-6, "maxiter": 500})
    return np.asarray(res.x), float(res.fun)


def tune(problem: TuneProblem, allow_delay: bool = True) -> TuneResult:
    """Best (beta_i, sigma_i) found by grid search plus simplex refinement.

    ``allow_delay=False`` pins every intentional delay to zero (the plain
    connected controller); otherwise delays for vehicles beyond the first are
    swept on the problem's grid. Ties in the objective break toward the
    smaller delay, then the smaller total gain.
    """
    omega, weights, values = _grid_arrays(problem)
    idx = problem.indices
    lo, hi = problem.beta_box
    beta_grid = np.linspace(lo, hi, problem.beta_grid_points)
    if allow_delay and len(idx) > 1:
        sigma_cells = np.arange(0.0, problem.sigma_max + 0.5 * problem.sigma_step,
                                problem.sigma_step)
    else:
        sigma_cells = np.array([0.0])

    candidates = []  # (J, sigma_other, beta_sum, beta_vec)
    for sigma_other in sigma_cells:
        grid = _grid_objective(problem, omega, weights, values, beta_grid,
                               sigma_other)
        for combo in np.ndindex(grid.shape):
            bvec = np.array([beta_grid[c] for c in combo])
            if not problem.region.contains(float(bvec.sum())):
                continue
            candidates.append((float(grid[combo]), float(sigma_other),
                               float(bvec.sum()), bvec))
    if not candidates:
        raise RuntimeError(
            "no feasible grid cell: the gain box does not intersect "
            f"[{problem.region.beta_sum_lower:.4g}, "
            f"{problem.region.beta_sum_upper:.4g})")
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))

    seen = set()
    best = None
    for j_cell, sigma_other, _, bvec in candidates:
        if sigma_other in seen:
            continue
        seen.add(sigma_other)
        beta_ref, j_ref = _simplex_refine(problem, omega, weights, values,
                                          bvec, sigma_other)
        if j_ref >= PENALTY:
            beta_ref, j_ref = bvec, j_cell
        key = (j_ref, sigma_other, float(beta_ref.sum()))
        if best is None or key < best[0]:
            best = (key, beta_ref, sigma_other)
        if len(seen) >= problem.refine_cells:
            break

    (j_best, sigma_best, _), beta_best, _ = best
    betas = {i: float(b) for i, b in zip(idx, beta_best)}
    sigmas = {i: (0.0 if i == 1 else float(sigma_best)) for i in idx}
    margin = problem.region.margin(float(beta_best.sum()))
    if margin < 0.0:
        raise RuntimeError("refined optimum left the stability region")
    return TuneResult(alpha=problem.alpha, betas=betas, sigmas=sigmas,
                      objective=float(j_best), feasibility_margin=float(margin),
                      estimator=problem.spectra.estimator)


def delay_sweep(problem: TuneProblem, sigma_grid=None):
    """Minimize over gains at each pinned delay; returns one row per delay.

    Rows are dicts with sigma, J, betas and the feasibility margin; the
    argmin row is flagged.
    """
    if len(problem.indices) < 2:
        raise ValueError("delay sweep needs a connected vehicle beyond the first")
    omega, weights, values = _grid_arrays(problem)
    lo, hi = problem.beta_box
    beta_grid = np.linspace(lo, hi, problem.beta_grid_points)
    if sigma_grid is None:
        sigma_grid = np.arange(0.0, problem.sigma_max + 0.5 * problem.sigma_step,
                               problem.sigma_step)
    rows = []
    for sigma_other in sigma_grid:
        grid = _grid_objective(problem, omega, weights, values, beta_grid,
                               float(sigma_other))
        best_cell = None
        for combo in np.ndindex(grid.shape):
            bvec = np.array([beta_grid[c] for c in combo])
            if not problem.region.contains(float(bvec.sum())):
                continue
            key = (float(grid[combo]), float(bvec.sum()))
            if best_cell is None or key < best_cell[0]:
                best_cell = (key, bvec)
        if best_cell is None:
            raise RuntimeError("no feasible gain cell at sigma = "
                               f"{float(sigma_other):.3g}")
        beta_ref, j_ref = _simplex_refine(problem, omega, weights, values,
                                          best_cell[1], float(sigma_other))
        if j_ref >= PENALTY:
            beta_ref, j_ref = best_cell[1], best_cell[0][0]
        rows.append({
            "sigma": float(sigma_other),
            "J": float(j_ref),
            "betas": {i: float(b) for i, b in zip(problem.indices, beta_ref)},
            "margin": problem.region.margin(float(beta_ref.sum())),
        })
    j_min = min(r["J"] for r in rows)
    for r in rows:
        r["is_argmin"] = r["J"] == j_min
    return rows
