"""Vehicle parameter sets and the static controller/plant nonlinearities."""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PlantParams",
    "PolicyParams",
    "ControllerParams",
    "HumanParams",
    "range_policy",
    "speed_policy",
    "saturate",
    "resistance",
]


@dataclass(frozen=True)
class PlantParams:
    """Truck physical constants; heavy-duty diesel tractor defaults.

    The powertrain actuation delay is not pinned down by the data sheet;
    0.4 s reproduces the published closed-loop energy figures and is kept as
    a configuration value.
    """

    mass: float = 29484.0
    rot_inertia: float = 39.9
    wheel_radius: float = 0.504
    gravity: float = 9.81
    rolling_coeff: float = 0.006
    air_drag: float = 3.84
    effective_mass: float | None = 29641.0
    actuation_delay: float = 0.4
    u_min: float = -6.0
    u_max: float = 2.0
    p_max: float = 300650.0

    def __post_init__(self):
        if self.effective_mass is None:
            object.__setattr__(self, "effective_mass", self.derived_effective_mass)
        if not (self.u_min < 0.0 < self.u_max):
            raise ValueError(f"need u_min < 0 < u_max, got [{self.u_min}, {self.u_max}]")
        if self.p_max <= 0:
            raise ValueError(f"p_max must be positive, got {self.p_max}")
        if self.actuation_delay < 0:
            raise ValueError(f"actuation delay must be >= 0, got {self.actuation_delay}")

    @property
    def derived_effective_mass(self) -> float:
        return self.mass + self.rot_inertia / self.wheel_radius**2


@dataclass(frozen=True)
class PolicyParams:
    """Range/speed policy constants; kappa is the range-policy gradient."""

    v_max: float = 35.0
    h_stop: float = 5.0
    h_go: float = 63.33

    def __post_init__(self):
        if self.h_stop >= self.h_go:
            raise ValueError(f"need h_stop < h_go, got {self.h_stop} >= {self.h_go}")
        if self.v_max <= 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")

    @property
    def kappa(self) -> float:
        return self.v_max / (self.h_go - self.h_stop)

    @classmethod
    def from_kappa(cls, kappa: float, v_max: float = 35.0, h_stop: float = 5.0):
        return cls(v_max=v_max, h_stop=h_stop, h_go=h_stop + v_max / kappa)

    def equilibrium_headway(self, v_star: float) -> float:
        return v_star / self.kappa + self.h_stop


@dataclass(frozen=True)
class ControllerParams:
    """Headway gain alpha, connected set, per-leader gains and delays.

    Vehicle 1 is sensed directly, so its information delay is pinned to zero.
    ``mode`` is "acc" exactly when the connected set is {1}.
    """

    alpha: float = 0.4
    connected: tuple[int, ...] = (1,)
    betas: dict[int, float] = field(default_factory=lambda: {1: 0.5})
    info_delays: dict[int, float] = field(default_factory=dict)
    policy: PolicyParams = field(default_factory=PolicyParams)

    def __post_init__(self):
        conn = tuple(sorted(set(self.connected)))
        object.__setattr__(self, "connected", conn)
        if 1 not in conn:
            raise ValueError(f"connected set must contain vehicle 1, got {conn}")
        delays = {i: float(self.info_delays.get(i, 0.0)) for i in conn}
        if delays[1] != 0.0:
            raise ValueError(f"sigma_1 must be 0, got {delays[1]}")
        for i, s in delays.items():
            if s < 0:
                raise ValueError(f"info delay for vehicle {i} must be >= 0, got {s}")
        object.__setattr__(self, "info_delays", delays)
        missing = [i for i in conn if i not in self.betas]
        if missing:
            raise ValueError(f"missing gains for vehicles {missing}")
        object.__setattr__(self, "betas", {i: float(self.betas[i]) for i in conn})

    @property
    def mode(self) -> str:
        return "acc" if self.connected == (1,) else "ccc"

    @property
    def beta_sum(self) -> float:
        return sum(self.betas.values())


@dataclass(frozen=True)
class HumanParams:
    """Optimal-velocity car-following parameters for the human-driven chain.

    The reaction delay applies to the perceived stimuli (headway and
    predecessor speed); the relaxation toward them uses the driver's current
    speed. The human range policy shares the stop distance and speed cap of
    the truck policy; its go distance follows from the gradient kappa_h so
    the policy stays continuous.
    """

    alpha_h: float = 0.2
    beta_h: float = 0.8
    kappa_h: float = 1.0
    reaction_delay: float = 1.0
    chain_length: int = 8
    h_stop: float = 5.0
    v_max: float = 35.0

    def __post_init__(self):
        for name in ("alpha_h", "beta_h", "kappa_h", "reaction_delay"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.chain_length < 2:
            raise ValueError(f"chain needs at least 2 vehicles, got {self.chain_length}")

    @property
    def policy(self) -> PolicyParams:
        return PolicyParams.from_kappa(self.kappa_h, v_max=self.v_max, h_stop=self.h_stop)

    def equilibrium_headway(self, v_star: float) -> float:
        return v_star / self.kappa_h + self.h_stop


def range_policy(policy: PolicyParams, h):
    """Desired speed for a headway: linear ramp clipped to [0, v_max]."""
    return np.clip(policy.kappa * (np.asarray(h, dtype=float) - policy.h_stop),
                   0.0, policy.v_max)


def speed_policy(policy: PolicyParams, v):
    """Cap a leader speed at the speed limit."""
    return np.minimum(np.asarray(v, dtype=float), policy.v_max)


def saturate(plant: PlantParams, u, v):
    """Clamp a commanded acceleration to the brake/torque/power envelope.

    The power branch P_max/(m_eff v) only binds for v > 0; at standstill the
    torque limit u_max applies.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    upper = np.where(v > 0.0,
                     np.minimum(plant.u_max, plant.p_max / (plant.effective_mass * v)),
                     plant.u_max)
    out = np.clip(u, plant.u_min, upper)
    return float(out) if out.ndim == 0 else out


def resistance(plant: PlantParams, v):
    """Rolling plus aerodynamic resistance as a deceleration, f(v)."""
    v = np.asarray(v, dtype=float)
    out = (plant.mass * plant.gravity * plant.rolling_coeff
           + plant.air_drag * v**2) / plant.effective_mass
    return float(out) if out.ndim == 0 else out
