"""Time-domain simulation of the human chain and the controlled truck.

Fixed-step explicit RK4 at 0.01 s with delayed terms read from history
buffers; delays are rounded to the nearest step (worst case 5 ms, far below
any delay in play). Input records at a coarser step are linearly
interpolated onto the simulation grid, and everything before t0 is held at
equilibrium. Trucks meter energy per unit mass with the trapezoid rule.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .freqdom import InfeasibleRegionError, stability_region
from .trajectory import SpeedTrajectory
from .vehicles import ControllerParams, HumanParams, PlantParams

__all__ = [
    "EnergyReport",
    "CollisionError",
    "simulate_ovm_chain",
    "simulate_truck_nonlinear",
    "simulate_truck_linear",
    "energy_from_series",
    "DT_SIM",
]

DT_SIM = 0.01


class CollisionError(RuntimeError):
    """The truck's headway reached zero; the run is invalid."""

    def __init__(self, time: float):
        super().__init__(f"collision: headway reached zero at t = {time:.2f} s")
        self.time = time


@dataclass(frozen=True)
class EnergyReport:
    """Energy per unit mass over [t0, tf]; w from the nonlinear metric,
    wbar from the linear surrogate. Either may be absent for a run that
    only exercised one model."""

    t0: float
    tf: float
    w: float | None = None
    wbar: float | None = None
    valid: bool = True
    warnings: tuple[str, ...] = field(default_factory=tuple)


def _steps(delay: float, dt: float) -> int:
    return int(round(delay / dt))


def _to_sim_grid(traj: SpeedTrajectory, vehicle: int, dt_sim: float) -> np.ndarray:
    t = traj.times()
    n_sim = int(math.floor((t[-1] - traj.t0) / dt_sim + 0.5)) + 1
    t_sim = traj.t0 + dt_sim * np.arange(n_sim)
    return np.interp(t_sim, t, traj.series[vehicle])


def _downsample(x: np.ndarray, stride: int) -> np.ndarray:
    return x[::stride].copy()


def energy_from_series(v, vdot, dt: float, drive=None, n_burn: int = 0) -> float:
    """Trapezoid integral of v * max(drive, 0); ``drive`` defaults to vdot.

    For the nonlinear metric pass drive = vdot + f(v) (the commanded traction
    after saturation); stretches where the drive is negative contribute
    nothing.
    """
    v = np.asarray(v, dtype=float)
    d = np.asarray(vdot if drive is None else drive, dtype=float)
    integrand = v * np.maximum(d, 0.0)
    return float(np.trapezoid(integrand[n_burn:], dx=dt))


def simulate_ovm_chain(lead: SpeedTrajectory, human: HumanParams,
                       v_star: float, dt_sim: float = DT_SIM):
    """Propagate the lead record down the human-driven chain.

    The lead record must carry the highest vehicle index; followers
    L-1 .. 1 are integrated one at a time, each driven by the previous
    output. Returns (trajectory with vehicles 1..L on the input grid, valid).
    A negative headway anywhere in the chain marks the run invalid.
    """
    lead_idx = max(lead.series)
    if human.chain_length != lead_idx:
        raise ValueError(
            f"lead record is vehicle {lead_idx} but the chain expects "
            f"{human.chain_length}")
    stride = int(round(lead.dt / dt_sim))
    if abs(stride * dt_sim - lead.dt) > 1e-9:
        raise ValueError(f"input step {lead.dt} is not a multiple of {dt_sim}")
    lead_sim = _to_sim_grid(lead, lead_idx, dt_sim)
    m = _steps(human.reaction_delay, dt_sim)
    h_eq = human.equilibrium_headway(v_star)
    pol = human.policy

    series = {lead_idx: lead.series[lead_idx].copy()}
    headways = {}
    valid = True
    current = lead_sim
    for i in range(lead_idx - 1, 0, -1):
        h, v, collided = _kernels.rk4_follower(
            current, dt_sim, human.alpha_h, human.beta_h, human.kappa_h,
            pol.h_stop, pol.v_max, m, h_eq, v_star, v_star)
        if collided >= 0:
            valid = False
        series[i] = _downsample(v, stride)[: lead.n_samples]
        headways[i] = _downsample(h, stride)[: lead.n_samples]
        current = v
    traj = SpeedTrajectory(t0=lead.t0, dt=lead.dt, series=series, headways=headways)
    return traj, valid


def _input_arrays(preceding: SpeedTrajectory, ctrl: ControllerParams,
                  dt_sim: float, center: bool):
    indices = list(ctrl.connected)
    missing = [i for i in indices if i not in preceding.series]
    if missing:
        raise KeyError(f"trajectory lacks connected vehicles {missing}")
    rows = []
    means = {}
    for i in indices:
        x = _to_sim_grid(preceding, i, dt_sim)
        if center:
            means[i] = float(np.mean(preceding.series[i]))
            x = x - means[i]
        rows.append(x)
    return indices, np.vstack(rows), means


def simulate_truck_nonlinear(preceding: SpeedTrajectory, plant: PlantParams,
                             ctrl: ControllerParams, v_star: float,
                             init: tuple[float, float] | None = None,
                             dt_sim: float = DT_SIM,
                             burn_in: float = 0.0):
    """Nonlinear truck under the delayed, saturated cruise controller.

    Returns (trajectory, report): the trajectory holds the truck speed under
    index 0 plus its headway, on the input grid. Raises CollisionError when
    the headway hits zero.
    """
    indices, inputs, _ = _input_arrays(preceding, ctrl, dt_sim, center=False)
    v1_sim = inputs[indices.index(1)]
    sigma_steps = _steps(plant.actuation_delay, dt_sim)
    delays_in = np.array(
        [_steps(plant.actuation_delay + ctrl.info_delays[i], dt_sim)
         for i in indices], dtype=np.int64)
    betas = np.array([ctrl.betas[i] for i in indices], dtype=float)
    pol = ctrl.policy
    if init is None:
        init = (pol.equilibrium_headway(v_star), v_star)
    c0 = plant.mass * plant.gravity * plant.rolling_coeff / plant.effective_mass
    c2 = plant.air_drag / plant.effective_mass

    h, v, acc, collided = _kernels.rk4_truck_nonlinear(
        v1_sim, inputs, delays_in, dt_sim, ctrl.alpha, pol.kappa, pol.h_stop,
        pol.v_max, betas, c0, c2, plant.u_min, plant.u_max,
        plant.p_max / plant.effective_mass, sigma_steps,
        float(init[0]), float(init[1]), v_star)
    if collided >= 0:
        raise CollisionError(preceding.t0 + collided * dt_sim)

    n_burn = int(round(burn_in / dt_sim))
    drive = acc + (c0 + c2 * v**2)
    w = energy_from_series(v, acc, dt_sim, drive=drive, n_burn=n_burn)
    stride = int(round(preceding.dt / dt_sim))
    traj = SpeedTrajectory(
        t0=preceding.t0, dt=preceding.dt,
        series={0: _downsample(v, stride)[: preceding.n_samples]},
        headways={0: _downsample(h, stride)[: preceding.n_samples]},
        accelerations={0: _downsample(acc, stride)[: preceding.n_samples]})
    t_end = preceding.t0 + (v1_sim.size - 1) * dt_sim
    report = EnergyReport(t0=preceding.t0 + burn_in, tf=t_end, w=w)
    return traj, report


def simulate_truck_linear(preceding: SpeedTrajectory, plant: PlantParams,
                          ctrl: ControllerParams, v_star: float,
                          dt_sim: float = DT_SIM, burn_in: float = 0.0,
                          centralize_inputs: bool = True):
    """Linearized dynamics driven by speed perturbations; surrogate energy.

    Input series are centralized (sample mean removed) unless told otherwise,
    matching the zero-mean assumption of the theory. A controller outside the
    plant-stable gain interval still runs but flags the report.
    """
    indices, inputs, _ = _input_arrays(preceding, ctrl, dt_sim,
                                       center=centralize_inputs)
    v1_sim = inputs[indices.index(1)]
    sigma_steps = _steps(plant.actuation_delay, dt_sim)
    delays_in = np.array(
        [_steps(plant.actuation_delay + ctrl.info_delays[i], dt_sim)
         for i in indices], dtype=np.int64)
    betas = np.array([ctrl.betas[i] for i in indices], dtype=float)

    warnings = []
    try:
        region = stability_region(ctrl.alpha, ctrl.policy.kappa,
                                  plant.actuation_delay)
        if not region.contains(float(betas.sum())):
            warnings.append("plant-unstable gains")
    except InfeasibleRegionError:
        warnings.append("plant-unstable gains")

    h, v, acc = _kernels.rk4_truck_linear(
        v1_sim, inputs, delays_in, dt_sim, ctrl.alpha, ctrl.policy.kappa,
        betas, sigma_steps)
    n_burn = int(round(burn_in / dt_sim))
    wbar = energy_from_series(v_star + v, acc, dt_sim, n_burn=n_burn)
    stride = int(round(preceding.dt / dt_sim))
    traj = SpeedTrajectory(
        t0=preceding.t0, dt=preceding.dt,
        series={0: _downsample(v, stride)[: preceding.n_samples]},
        headways={0: _downsample(h, stride)[: preceding.n_samples]},
        accelerations={0: _downsample(acc, stride)[: preceding.n_samples]})
    t_end = preceding.t0 + (v1_sim.size - 1) * dt_sim
    report = EnergyReport(t0=preceding.t0 + burn_in, tf=t_end, wbar=wbar,
                          warnings=tuple(warnings))
    return traj, report
