"""Run configuration: one nested document, every default explicit.

``default_config()`` returns the full tree; ``load_config`` merges a user
JSON file over it. Harness runs write the fully resolved tree next to their
outputs so every default in effect is on record.
"""

import copy
import json

from .gp import GpConfig, MaternKernel
from .spectral import WelchConfig
from .vehicles import HumanParams, PlantParams, PolicyParams

__all__ = ["default_config", "load_config", "merge_config",
           "build_kernel", "build_gp_config", "build_plant", "build_policy",
           "build_human", "build_welch_config"]


def default_config() -> dict:
    return {
        "gp": {
            "amplitude": 1.0,
            "length_scale": 5.0,
            "smoothness": 2.5,
            "mean_speed": 25.0,
            "duration": 500.0,
            "dt": 0.1,
        },
        "human": {
            "alpha": 0.2,
            "beta": 0.8,
            "kappa": 1.0,
            "reaction_delay": 1.0,
            "chain_length": 8,
            "h_stop": 5.0,
            "v_max": 35.0,
        },
        "plant": {
            "mass": 29484.0,
            "rot_inertia": 39.9,
            "wheel_radius": 0.504,
            "gravity": 9.81,
            "rolling_coeff": 0.006,
            "air_drag": 3.84,
            "effective_mass": 29641.0,
            "actuation_delay": 0.4,
            "u_min": -6.0,
            "u_max": 2.0,
            "p_max": 300650.0,
        },
        "policy": {
            "v_max": 35.0,
            "h_stop": 5.0,
            "h_go": 63.33,
        },
        "controller": {
            "alpha": 0.4,
            "leader": 8,
        },
        "welch": {
            "segment_length": None,
            "overlap_ratio": 0.5,
            "window_kind": "hamming",
        },
        "tune": {
            "sigma_max": 6.0,
            "sigma_step": 0.25,
            "beta_min": 0.0,
            "beta_max": 2.0,
            "beta_grid_points": 9,
            "refine_cells": 3,
            "folding": "one-sided",
        },
        "sim": {
            "dt": 0.01,
            "burn_in": 50.0,
        },
        "harness": {
            "dataset_count": 101,
            "base_seed": 0,
            "threads": 1,
        },
    }


def merge_config(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in out:
            raise KeyError(f"unknown config key {key!r}")
        if isinstance(val, dict) and isinstance(out[key], dict):
            out[key] = merge_config(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path=None) -> dict:
    cfg = default_config()
    if path is None:
        return cfg
    with open(path) as fh:
        return merge_config(cfg, json.load(fh))


def build_kernel(cfg: dict) -> MaternKernel:
    g = cfg["gp"]
    return MaternKernel(amplitude=g["amplitude"], length_scale=g["length_scale"],
                        smoothness=g["smoothness"])


def build_gp_config(cfg: dict, seed: int) -> GpConfig:
    g = cfg["gp"]
    return GpConfig(kernel=build_kernel(cfg), mean_speed=g["mean_speed"],
                    duration=g["duration"], dt=g["dt"], seed=seed)


def build_plant(cfg: dict) -> PlantParams:
    return PlantParams(**cfg["plant"])


def build_policy(cfg: dict) -> PolicyParams:
    return PolicyParams(**cfg["policy"])


def build_human(cfg: dict) -> HumanParams:
    h = cfg["human"]
    return HumanParams(alpha_h=h["alpha"], beta_h=h["beta"], kappa_h=h["kappa"],
                       reaction_delay=h["reaction_delay"],
                       chain_length=h["chain_length"], h_stop=h["h_stop"],
                       v_max=h["v_max"])


def build_welch_config(cfg: dict, n_samples: int) -> WelchConfig:
    w = cfg["welch"]
    if w["segment_length"] is None:
        from .spectral import default_welch_config
        base = default_welch_config(n_samples)
        return WelchConfig(segment_length=base.segment_length,
                           overlap_ratio=w["overlap_ratio"],
                           window_kind=w["window_kind"])
    return WelchConfig(segment_length=w["segment_length"],
                       overlap_ratio=w["overlap_ratio"],
                       window_kind=w["window_kind"])
