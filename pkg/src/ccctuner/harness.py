"""Experiment orchestration: dataset generation, cross evaluation, studies.

Cross evaluation pairs an observation dataset (spectra are estimated and the
controller tuned on it) with a different test dataset (the tuned truck is
simulated on it, linearly and nonlinearly). Oracle-tuned parameters do not
depend on the observation record, so oracle rows reuse one tune and one
simulation per test dataset.

Every run is deterministic given the seed list; report CSVs are written with
repr-round-trip floats so reruns are byte identical.
"""

import csv
import json
import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import (build_gp_config, build_human, build_kernel, build_plant,
                     build_policy, build_welch_config, default_config)
from .gp import sample_gp
from .oracle import default_oracle_grid, oracle_spectral_matrix
from .simulate import (CollisionError, simulate_ovm_chain,
                       simulate_truck_linear, simulate_truck_nonlinear)
from .spectral import estimate_matrix
from .trajectory import SpeedTrajectory, read_trajectory_csv
from .tuner import TuneProblem, TuneResult, tune
from .vehicles import ControllerParams

__all__ = [
    "CrossEvalPlan",
    "ExperimentReport",
    "IngestionError",
    "generate_dataset",
    "generate_datasets",
    "tune_controllers",
    "cross_evaluate",
    "delay_benefit_study",
    "leader_sweep",
    "ingest_external",
    "aggregate_rows",
]

log = logging.getLogger(__name__)

MODES = ("acc", "ccc", "ccc-delay")
ESTIMATORS = ("oracle", "periodogram", "welch")


@dataclass(frozen=True)
class CrossEvalPlan:
    """All ordered observation/test pairs over distinct datasets."""

    dataset_count: int = 101
    modes: tuple[str, ...] = MODES
    estimators: tuple[str, ...] = ESTIMATORS
    leader: int = 8
    base_seed: int = 0

    def __post_init__(self):
        if self.dataset_count < 2:
            raise ValueError("cross evaluation needs at least two datasets")
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ValueError(f"unknown estimator {e!r}")

    @property
    def pair_count(self) -> int:
        return self.dataset_count * (self.dataset_count - 1)

    def pairs(self):
        for obs in range(self.dataset_count):
            for test in range(self.dataset_count):
                if obs != test:
                    yield obs, test

    @property
    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.dataset_count)]


@dataclass
class ExperimentReport:
    rows: list[dict]
    aggregates: dict = field(default_factory=dict)

    def recompute(self):
        self.aggregates = aggregate_rows(self.rows)
        return self.aggregates


ROW_FIELDS = ("pair_id", "obs", "test", "mode", "estimator", "L",
              "w", "wbar", "valid")


def _row_checksum(row: dict) -> int:
    text = ",".join(_fmt(row[f]) for f in ROW_FIELDS)
    return zlib.crc32(text.encode())


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def aggregate_rows(rows: list[dict]) -> dict:
    """Group means and the relative-advantage statistics, all recomputable."""
    groups: dict[tuple[str, str], dict] = {}
    for row in rows:
        key = (row["mode"], row["estimator"])
        g = groups.setdefault(key, {"w": [], "wbar": [], "invalid": 0})
        if row["valid"]:
            if row["w"] is not None:
                g["w"].append(row["w"])
            if row["wbar"] is not None:
                g["wbar"].append(row["wbar"])
        else:
            g["invalid"] += 1
    out = {"groups": {}, "savings_vs_acc": {}, "estimator_advantage": {}}
    for (mode, est), g in sorted(groups.items()):
        out["groups"][f"{mode}/{est}"] = {
            "mean_w": float(np.mean(g["w"])) if g["w"] else None,
            "mean_wbar": float(np.mean(g["wbar"])) if g["wbar"] else None,
            "n_valid": len(g["wbar"]) or len(g["w"]),
            "n_invalid": g["invalid"],
        }
    for est in {e for _, e in groups}:
        acc = out["groups"].get(f"acc/{est}")
        if not acc:
            continue
        for mode in ("ccc", "ccc-delay"):
            g = out["groups"].get(f"{mode}/{est}")
            if not g:
                continue
            entry = {}
            for kind in ("w", "wbar"):
                if g[f"mean_{kind}"] is not None and acc[f"mean_{kind}"]:
                    entry[f"saving_{kind}_pct"] = 100.0 * (
                        1.0 - g[f"mean_{kind}"] / acc[f"mean_{kind}"])
            out["savings_vs_acc"][f"{mode}/{est}"] = entry
    # periodogram-vs-welch advantage per pair, matched on (pair, mode)
    by_key = {}
    for row in rows:
        if row["valid"]:
            by_key[(row["pair_id"], row["mode"], row["estimator"])] = row
    for mode in {m for m, _ in groups}:
        deltas_lin, deltas_nl = [], []
        for (pair_id, m, est), row in by_key.items():
            if m != mode or est != "periodogram":
                continue
            other = by_key.get((pair_id, mode, "welch"))
            if not other:
                continue
            if row["wbar"] is not None and other["wbar"]:
                deltas_lin.append((row["wbar"] - other["wbar"]) / other["wbar"])
            if row["w"] is not None and other["w"]:
                deltas_nl.append((row["w"] - other["w"]) / other["w"])
        if deltas_lin or deltas_nl:
            out["estimator_advantage"][mode] = {
                "mean_dwbar_pw_pct": 100.0 * float(np.mean(deltas_lin)) if deltas_lin else None,
                "mean_dw_pw_pct": 100.0 * float(np.mean(deltas_nl)) if deltas_nl else None,
                "n_pairs": max(len(deltas_lin), len(deltas_nl)),
            }
    return out


class IngestionError(ValueError):
    pass


def generate_dataset(cfg: dict, seed: int, max_attempts: int = 8) -> SpeedTrajectory:
    """One synthetic multi-vehicle dataset: sampled lead plus simulated chain.

    A collision in the human chain discards the draw and retries with the
    next sub-seed (logged); the dataset seed space is offset so retries never
    collide with other datasets' seeds.
    """
    human = build_human(cfg)
    v_star = cfg["gp"]["mean_speed"]
    for attempt in range(max_attempts):
        sub_seed = seed + 1_000_003 * attempt
        gp_cfg = build_gp_config(cfg, sub_seed)
        lead = sample_gp(gp_cfg, vehicle=human.chain_length)
        chain, valid = simulate_ovm_chain(lead, human, v_star=v_star,
                                          dt_sim=cfg["sim"]["dt"])
        if valid:
            return chain
        log.warning("collision in human chain for seed %d (attempt %d); "
                    "regenerating", seed, attempt)
    raise RuntimeError(f"could not generate a collision-free dataset for seed {seed}")


def generate_datasets(cfg: dict, plan: CrossEvalPlan) -> list[SpeedTrajectory]:
    return [generate_dataset(cfg, s) for s in plan.seeds]


def _connected(mode: str, leader: int) -> tuple[int, ...]:
    return (1,) if mode == "acc" else (1, leader)


def _controller(cfg: dict, mode: str, leader: int, result: TuneResult) -> ControllerParams:
    return ControllerParams(alpha=cfg["controller"]["alpha"],
                            connected=_connected(mode, leader),
                            betas=result.betas, info_delays=result.sigmas,
                            policy=build_policy(cfg))


def _tune_problem(cfg: dict, est, indices) -> TuneProblem:
    t = cfg["tune"]
    return TuneProblem.from_estimate(
        cfg["controller"]["alpha"], build_policy(cfg).kappa,
        cfg["plant"]["actuation_delay"], indices, est,
        sigma_max=t["sigma_max"], sigma_step=t["sigma_step"],
        beta_box=(t["beta_min"], t["beta_max"]),
        beta_grid_points=t["beta_grid_points"],
        refine_cells=t["refine_cells"], folding=t["folding"])


def _estimate_for(cfg: dict, dataset: SpeedTrajectory, estimator: str, indices):
    if estimator == "oracle":
        n = int(round(cfg["gp"]["duration"] / cfg["gp"]["dt"]))
        grid = default_oracle_grid(n, cfg["gp"]["dt"])
        return oracle_spectral_matrix(build_kernel(cfg), build_human(cfg),
                                      indices, grid, dt=cfg["gp"]["dt"],
                                      n_samples=n)
    if estimator == "welch":
        wc = build_welch_config(cfg, dataset.n_samples)
        return estimate_matrix(dataset, indices, estimator="welch", welch_cfg=wc)
    return estimate_matrix(dataset, indices, estimator="periodogram")


def tune_controllers(cfg: dict, dataset: SpeedTrajectory | None, estimator: str,
                     modes, leader: int) -> dict[str, TuneResult]:
    """Tuned parameters per mode for one observation dataset (or the oracle)."""
    results = {}
    cache = {}
    for mode in modes:
        indices = _connected(mode, leader)
        if indices not in cache:
            cache[indices] = _estimate_for(cfg, dataset, estimator, indices)
        problem = _tune_problem(cfg, cache[indices], indices)
        results[mode] = tune(problem, allow_delay=(mode == "ccc-delay"))
    return results


def _evaluate(cfg: dict, dataset: SpeedTrajectory, mode: str, leader: int,
              result: TuneResult):
    """(w, wbar, valid) for one tuned controller on one test dataset."""
    plant = build_plant(cfg)
    v_star = cfg["gp"]["mean_speed"]
    burn = cfg["sim"]["burn_in"]
    dt_sim = cfg["sim"]["dt"]
    ctrl = _controller(cfg, mode, leader, result)
    sub = dataset.subset(_connected(mode, leader))
    _, rep_lin = simulate_truck_linear(sub, plant, ctrl, v_star=v_star,
                                       dt_sim=dt_sim, burn_in=burn)
    try:
        _, rep_nl = simulate_truck_nonlinear(sub, plant, ctrl, v_star=v_star,
                                             dt_sim=dt_sim, burn_in=burn)
        return rep_nl.w, rep_lin.wbar, True
    except CollisionError:
        return None, rep_lin.wbar, False


def cross_evaluate(cfg: dict, plan: CrossEvalPlan,
                   datasets: list[SpeedTrajectory] | None = None,
                   pair_subset=None, threads: int = 1) -> ExperimentReport:
    """Tune on each observation dataset, score on every other test dataset.

    ``pair_subset`` restricts to an iterable of (obs, test) pairs (the full
    ordered-pair set otherwise). Energies keyed by (test, mode, estimator)
    are cached, which collapses the oracle estimator to one simulation per
    test dataset.
    """
    datasets = datasets or generate_datasets(cfg, plan)
    pairs = list(pair_subset) if pair_subset is not None else list(plan.pairs())
    obs_needed = sorted({o for o, _ in pairs})

    tunes: dict[tuple[str, int | None], dict[str, TuneResult]] = {}
    for estimator in plan.estimators:
        if estimator == "oracle":
            tunes[(estimator, None)] = tune_controllers(
                cfg, None, estimator, plan.modes, plan.leader)
        else:
            for obs in obs_needed:
                tunes[(estimator, obs)] = tune_controllers(
                    cfg, datasets[obs], estimator, plan.modes, plan.leader)

    sim_cache: dict[tuple, tuple] = {}

    def sim_key(estimator, obs, test, mode):
        if estimator == "oracle":
            return ("oracle", None, test, mode)
        return (estimator, obs, test, mode)

    jobs = []
    for estimator in plan.estimators:
        for obs, test in pairs:
            for mode in plan.modes:
                key = sim_key(estimator, obs, test, mode)
                if key not in sim_cache:
                    sim_cache[key] = None
                    jobs.append(key)

    def run_job(key):
        estimator, obs, test, mode = key
        result = tunes[(estimator, obs)][mode]
        return key, _evaluate(cfg, datasets[test], mode, plan.leader, result)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for key, val in pool.map(run_job, jobs):
                sim_cache[key] = val
    else:
        for key in jobs:
            sim_cache[key] = run_job(key)[1]

    rows = []
    for estimator in plan.estimators:
        for obs, test in pairs:
            pair_id = f"{obs:03d}-{test:03d}"
            for mode in plan.modes:
                w, wbar, valid = sim_cache[sim_key(estimator, obs, test, mode)]
                row = {"pair_id": pair_id, "obs": obs, "test": test,
                       "mode": mode, "estimator": estimator,
                       "L": plan.leader if mode != "acc" else 1,
                       "w": w, "wbar": wbar, "valid": valid}
                row["checksum"] = _row_checksum(row)
                rows.append(row)
    report = ExperimentReport(rows=rows)
    report.recompute()
    report.aggregates["tunes"] = {
        f"{est}/{obs if obs is not None else 'oracle'}/{mode}": {
            "betas": r.betas, "sigmas": r.sigmas, "J": r.objective}
        for (est, obs), per_mode in sorted(
            tunes.items(), key=lambda kv: (kv[0][0], -1 if kv[0][1] is None else kv[0][1]))
        for mode, r in per_mode.items()}
    return report


def delay_benefit_study(report: ExperimentReport) -> dict:
    """Relative cost of zeroing the intentional delays, per estimator.

    For each matched pair row, compares the delay-free connected controller
    against the delayed one: positive values mean the delay saved energy.
    """
    by_key = {(r["pair_id"], r["estimator"], r["mode"]): r
              for r in report.rows if r["valid"]}
    out = {}
    for est in {r["estimator"] for r in report.rows}:
        d_lin, d_nl = [], []
        for (pair_id, e, mode), row in by_key.items():
            if e != est or mode != "ccc":
                continue
            delayed = by_key.get((pair_id, est, "ccc-delay"))
            if not delayed:
                continue
            if row["wbar"] and delayed["wbar"]:
                d_lin.append((row["wbar"] - delayed["wbar"]) / delayed["wbar"])
            if row["w"] and delayed["w"]:
                d_nl.append((row["w"] - delayed["w"]) / delayed["w"])
        if d_lin:
            out[est] = {
                "mean_dwbar_hat_pct": 100.0 * float(np.mean(d_lin)),
                "mean_dw_hat_pct": 100.0 * float(np.mean(d_nl)) if d_nl else None,
                "frac_positive_lin": float(np.mean(np.array(d_lin) > 0)),
                "deltas_lin": [float(x) for x in d_lin],
                "deltas_nl": [float(x) for x in d_nl],
            }
    return out


def leader_sweep(cfg: dict, plan: CrossEvalPlan, leaders=range(2, 9),
                 datasets=None, eval_pairs: int = 100) -> list[dict]:
    """Tuned parameters and energies as the connected vehicle moves upstream.

    For each leader index: oracle parameters once, data-driven parameters per
    dataset (mean and spread reported), energies over a deterministic pair
    subset.
    """
    datasets = datasets or generate_datasets(cfg, plan)
    pairs = [(o, t) for o, t in plan.pairs()][:eval_pairs]
    out = []
    for leader in leaders:
        sub_plan = CrossEvalPlan(dataset_count=plan.dataset_count,
                                 modes=("ccc-delay",),
                                 estimators=plan.estimators,
                                 leader=leader, base_seed=plan.base_seed)
        rep = cross_evaluate(cfg, sub_plan, datasets=datasets,
                             pair_subset=pairs)
        row = {"L": leader}
        for est in plan.estimators:
            per_obs = []
            if est == "oracle":
                per_obs = [tune_controllers(cfg, None, est, ("ccc-delay",),
                                            leader)["ccc-delay"]]
            else:
                for obs in sorted({o for o, _ in pairs}):
                    per_obs.append(tune_controllers(cfg, datasets[obs], est,
                                                    ("ccc-delay",), leader)["ccc-delay"])
            b1 = [r.betas[1] for r in per_obs]
            bl = [r.betas[leader] for r in per_obs]
            sl = [r.sigmas[leader] for r in per_obs]
            g = rep.aggregates["groups"][f"ccc-delay/{est}"]
            row[est] = {
                "beta1_mean": float(np.mean(b1)), "beta1_std": float(np.std(b1)),
                "betaL_mean": float(np.mean(bl)), "betaL_std": float(np.std(bl)),
                "sigmaL_mean": float(np.mean(sl)), "sigmaL_std": float(np.std(sl)),
                "mean_w": g["mean_w"], "mean_wbar": g["mean_wbar"],
            }
        out.append(row)
    return out


def ingest_external(path, target_dt: float | None = None) -> SpeedTrajectory:
    """Validated ingestion of a third-party trajectory CSV.

    Requires the interchange schema; tolerates sub-microsecond time jitter,
    resamples non-uniform time bases by linear interpolation (logged), and
    rejects NaNs, non-monotone time, or gaps wider than twice the median
    step, naming the offending rows.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["t"]:
        raise IngestionError(f"{path}: expected header t,v_1,...")
    header = rows[0]
    vehicles = []
    for col in header[1:]:
        if not col.startswith("v_"):
            raise IngestionError(f"{path}: bad column {col!r}")
        vehicles.append(int(col[2:]))
    try:
        data = np.array([[float(x) for x in row] for row in rows[1:]])
    except ValueError as exc:
        raise IngestionError(f"{path}: non-numeric cell ({exc})") from exc
    if data.shape[0] < 2:
        raise IngestionError(f"{path}: need at least two samples")
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        r, c = bad[0]
        raise IngestionError(f"{path}: NaN or infinity at row {r + 2}, "
                             f"column {header[c]}")
    t = data[:, 0]
    dts = np.diff(t)
    if np.any(dts <= 0):
        r = int(np.argmax(dts <= 0))
        raise IngestionError(f"{path}: time not strictly increasing at row {r + 3}")
    dt = float(np.median(dts))
    gaps = np.argwhere(dts > 2.0 * dt)
    if gaps.size:
        r = int(gaps[0])
        raise IngestionError(
            f"{path}: time gap of {dts[r]:.6g} s (> 2*dt = {2 * dt:.6g}) "
            f"between rows {r + 2} and {r + 3} (t = {t[r]:.6g})")
    series = {v: data[:, j + 1] for j, v in enumerate(vehicles)}
    if np.max(np.abs(dts - dt)) <= 1e-6:
        traj = SpeedTrajectory(t0=float(t[0]), dt=dt, series=series)
    else:
        log.warning("%s: non-uniform time base (max jitter %.3g s); "
                    "resampling by linear interpolation", path,
                    float(np.max(np.abs(dts - dt))))
        n_new = int(math.floor((t[-1] - t[0]) / dt)) + 1
        t_new = t[0] + dt * np.arange(n_new)
        traj = SpeedTrajectory(
            t0=float(t[0]), dt=dt,
            series={v: np.interp(t_new, t, s) for v, s in series.items()})
    if target_dt is not None and abs(target_dt - traj.dt) > 1e-12:
        traj = traj.resample(target_dt)
    return traj


def write_report(report: ExperimentReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ROW_FIELDS) + ["checksum"])
        for row in report.rows:
            writer.writerow([_fmt(row[f]) for f in ROW_FIELDS] + [row["checksum"]])
    with open(out / "energy.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "mode", "L", "w", "wbar", "valid"])
        for row in report.rows:
            run_id = f"{row['pair_id']}-{row['estimator']}"
            writer.writerow([run_id, row["mode"], row["L"], _fmt(row["w"]),
                             _fmt(row["wbar"]), 1 if row["valid"] else 0])
    with open(out / "aggregates.json", "w") as fh:
        json.dump(report.aggregates, fh, indent=2, sort_keys=True)


def read_report(path) -> ExperimentReport:
    rows = []
    with open(Path(path) / "report.csv", newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {
                "pair_id": rec["pair_id"], "obs": int(rec["obs"]),
                "test": int(rec["test"]), "mode": rec["mode"],
                "estimator": rec["estimator"], "L": int(rec["L"]),
                "w": float(rec["w"]) if rec["w"] else None,
                "wbar": float(rec["wbar"]) if rec["wbar"] else None,
                "valid": rec["valid"] == "1",
            }
            row["checksum"] = int(rec["checksum"])
            if row["checksum"] != _row_checksum(row):
                raise ValueError(f"checksum mismatch on pair {row['pair_id']}")
            rows.append(row)
    report = ExperimentReport(rows=rows)
    report.recompute()
    return report
