"""Command-line entry points for the tuning and simulation toolkit."""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .config import (build_human, build_plant, build_policy, build_welch_config,
                     load_config)
from .freqdom import stability_region
from .gp import sample_gp
from .harness import (CrossEvalPlan, cross_evaluate, delay_benefit_study,
                      generate_dataset, ingest_external, leader_sweep,
                      tune_controllers, write_report)
from .simulate import (CollisionError, simulate_truck_linear,
                       simulate_truck_nonlinear)
from .spectral import write_spectral_csv
from .trajectory import read_trajectory_csv, write_trajectory_csv
from .tuner import TuneResult
from .vehicles import ControllerParams


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_config(cfg: dict, out: Path) -> None:
    with open(out / "config_used.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)


def _estimator_list(args):
    return (args.estimator,) if args.estimator else harness.ESTIMATORS


def _mode_list(args):
    return (args.mode,) if args.mode else harness.MODES


def cmd_generate(args, cfg):
    out = _out_dir(args)
    _dump_config(cfg, out)
    for i in range(args.count):
        traj = generate_dataset(cfg, args.seed + i)
        write_trajectory_csv(traj, out / f"dataset_{i:03d}.csv")
    print(f"wrote {args.count} datasets to {out}")


def cmd_ingest(args, cfg):
    out = _out_dir(args)
    traj = ingest_external(args.input, target_dt=args.target_dt)
    write_trajectory_csv(traj, out / Path(args.input).name)
    print(f"ingested {args.input}: {len(traj.vehicles)} vehicles, "
          f"{traj.n_samples} samples at dt = {traj.dt} s")


def cmd_estimate(args, cfg):
    out = _out_dir(args)
    traj = read_trajectory_csv(args.input)
    indices = [int(x) for x in args.indices.split(",")]
    estimator = args.estimator or "periodogram"
    if estimator == "oracle":
        raise SystemExit("estimate works on data; pick periodogram or welch")
    from .spectral import estimate_matrix
    wc = build_welch_config(cfg, traj.n_samples) if estimator == "welch" else None
    est = estimate_matrix(traj, indices, estimator=estimator, welch_cfg=wc)
    write_spectral_csv(est, out / "spectra.csv")
    print(f"wrote spectra for vehicles {indices} to {out / 'spectra.csv'}")


def cmd_tune(args, cfg):
    out = _out_dir(args)
    _dump_config(cfg, out)
    estimator = args.estimator or "periodogram"
    mode = args.mode or "ccc-delay"
    leader = cfg["controller"]["leader"]
    dataset = read_trajectory_csv(args.input) if args.input else None
    if dataset is None and estimator != "oracle":
        raise SystemExit("data-driven tuning needs --input <trajectory csv>")
    results = tune_controllers(cfg, dataset, estimator, (mode,), leader)
    res = results[mode]
    path = out / f"tune_{mode}_{estimator}.json"
    path.write_text(res.to_json())
    print(res.to_json())
    print(f"wrote {path}")


def cmd_simulate(args, cfg):
    out = _out_dir(args)
    traj = read_trajectory_csv(args.input)
    res = TuneResult.from_json(Path(args.params).read_text())
    mode = args.mode or ("acc" if len(res.betas) == 1 else "ccc-delay")
    leader = max(res.betas)
    ctrl = ControllerParams(alpha=res.alpha,
                            connected=harness._connected(mode, leader),
                            betas=res.betas, info_delays=res.sigmas,
                            policy=build_policy(cfg))
    plant = build_plant(cfg)
    v_star = cfg["gp"]["mean_speed"]
    sub = traj.subset(ctrl.connected)
    lin_traj, lin_rep = simulate_truck_linear(
        sub, plant, ctrl, v_star=v_star, dt_sim=cfg["sim"]["dt"],
        burn_in=cfg["sim"]["burn_in"])
    row = {"mode": mode, "L": leader, "wbar": lin_rep.wbar}
    try:
        nl_traj, nl_rep = simulate_truck_nonlinear(
            sub, plant, ctrl, v_star=v_star, dt_sim=cfg["sim"]["dt"],
            burn_in=cfg["sim"]["burn_in"])
        row.update(w=nl_rep.w, valid=1)
        write_trajectory_csv(nl_traj, out / "truck_nonlinear.csv")
    except CollisionError as exc:
        row.update(w=None, valid=0)
        print(f"nonlinear run invalid: {exc}", file=sys.stderr)
    write_trajectory_csv(lin_traj, out / "truck_linear_perturbation.csv")
    with open(out / "energy.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "mode", "L", "w", "wbar", "valid"])
        writer.writerow(["cli", row["mode"], row["L"],
                         harness._fmt(row.get("w")), harness._fmt(row["wbar"]),
                         row.get("valid", 1)])
    print(f"wbar = {row['wbar']:.1f} J/kg"
          + (f", w = {row['w']:.1f} J/kg" if row.get("w") else ""))


def cmd_stability(args, cfg):
    if args.out == "out":
        args.out = None  # print-only unless an output directory is named
    pol = build_policy(cfg)
    alpha = cfg["controller"]["alpha"]
    sigma = cfg["plant"]["actuation_delay"]
    region = stability_region(alpha, pol.kappa, sigma)
    print(f"alpha = {alpha}, kappa = {pol.kappa:.6f}, sigma = {sigma}")
    print(f"gain-sum interval: [{region.beta_sum_lower:.6f}, "
          f"{region.beta_sum_upper:.6f})")
    print(f"crossing frequencies: {region.omega_lower:.6f}, "
          f"{region.omega_upper:.6f} rad/s")
    if args.out:
        out = _out_dir(args)
        sigmas = np.linspace(args.sigma_min, args.sigma_max, args.points)
        with open(out / "stability_boundary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sigma", "beta_sum_lower", "beta_sum_upper"])
            for s in sigmas:
                r = stability_region(alpha, pol.kappa, float(s))
                writer.writerow([repr(float(s)), repr(r.beta_sum_lower),
                                 repr(r.beta_sum_upper)])
        print(f"wrote boundary polyline to {out / 'stability_boundary.csv'}")


def _load_datasets(cfg, plan, data_dir):
    if data_dir:
        paths = sorted(Path(data_dir).glob("dataset_*.csv"))
        if len(paths) < plan.dataset_count:
            raise SystemExit(f"{data_dir} holds {len(paths)} datasets, "
                             f"plan needs {plan.dataset_count}")
        return [read_trajectory_csv(p) for p in paths[: plan.dataset_count]]
    return harness.generate_datasets(cfg, plan)


def cmd_cross_eval(args, cfg):
    out = _out_dir(args)
    _dump_config(cfg, out)
    plan = CrossEvalPlan(dataset_count=args.datasets,
                         modes=_mode_list(args),
                         estimators=_estimator_list(args),
                         leader=cfg["controller"]["leader"],
                         base_seed=args.seed)
    datasets = _load_datasets(cfg, plan, args.data_dir)
    pair_subset = None
    if args.max_pairs:
        pair_subset = [p for p in plan.pairs()][: args.max_pairs]
    report = cross_evaluate(cfg, plan, datasets=datasets,
                            pair_subset=pair_subset, threads=args.threads)
    write_report(report, out)
    print(json.dumps({k: v for k, v in report.aggregates.items()
                      if k != "tunes"}, indent=2, sort_keys=True))
    print(f"wrote report to {out}")


def cmd_delay_study(args, cfg):
    out = _out_dir(args)
    _dump_config(cfg, out)
    plan = CrossEvalPlan(dataset_count=args.datasets,
                         modes=("ccc", "ccc-delay"),
                         estimators=_estimator_list(args),
                         leader=cfg["controller"]["leader"],
                         base_seed=args.seed)
    datasets = _load_datasets(cfg, plan, args.data_dir)
    pair_subset = None
    if args.max_pairs:
        pair_subset = [p for p in plan.pairs()][: args.max_pairs]
    report = cross_evaluate(cfg, plan, datasets=datasets,
                            pair_subset=pair_subset, threads=args.threads)
    stats = delay_benefit_study(report)
    with open(out / "delay_benefit.json", "w") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
    from .plots import plot_histograms
    for kind, key in (("linear", "deltas_lin"), ("nonlinear", "deltas_nl")):
        series = {est: [100 * x for x in s[key]] for est, s in stats.items() if s[key]}
        if series:
            plot_histograms(series, out / f"delay_benefit_{kind}.svg",
                            xlabel="relative energy cost of removing delay [%]")
    print(json.dumps({e: {k: v for k, v in s.items() if not k.startswith("deltas")}
                      for e, s in stats.items()}, indent=2, sort_keys=True))


def cmd_leader_sweep(args, cfg):
    out = _out_dir(args)
    _dump_config(cfg, out)
    plan = CrossEvalPlan(dataset_count=args.datasets,
                         modes=("ccc-delay",),
                         estimators=_estimator_list(args),
                         leader=cfg["controller"]["leader"],
                         base_seed=args.seed)
    datasets = _load_datasets(cfg, plan, args.data_dir)
    rows = leader_sweep(cfg, plan, leaders=range(args.l_min, args.l_max + 1),
                        datasets=datasets, eval_pairs=args.max_pairs or 100)
    fields = ["L"]
    for est in plan.estimators:
        for stat in ("beta1_mean", "beta1_std", "betaL_mean", "betaL_std",
                     "sigmaL_mean", "sigmaL_std", "mean_w", "mean_wbar"):
            fields.append(f"{est}_{stat}")
    with open(out / "leader_sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            rec = [row["L"]]
            for est in plan.estimators:
                for stat in ("beta1_mean", "beta1_std", "betaL_mean",
                             "betaL_std", "sigmaL_mean", "sigmaL_std",
                             "mean_w", "mean_wbar"):
                    rec.append(harness._fmt(row[est][stat]))
            writer.writerow(rec)
    from .plots import plot_curves
    ls = [row["L"] for row in rows]
    for metric, ylabel in (("mean_wbar", "surrogate energy [J/kg]"),
                           ("mean_w", "energy [J/kg]")):
        curves = {est: ([row[est][metric] for row in rows], None)
                  for est in plan.estimators}
        plot_curves(ls, curves, out / f"leader_sweep_{metric}.svg",
                    xlabel="leader index", ylabel=ylabel)
    print(f"wrote leader sweep to {out}")


GLOBAL_DEFAULTS = {"config": None, "seed": 0, "out": "out", "estimator": None,
                   "mode": None, "threads": 1, "verbose": False}


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted both before and after the subcommand; SUPPRESS
    # keeps the subparser pass from clobbering values parsed by the main one
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="JSON config merged over defaults")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    common.add_argument("--estimator", choices=harness.ESTIMATORS,
                        default=argparse.SUPPRESS)
    common.add_argument("--mode", choices=harness.MODES,
                        default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="ccctuner", parents=[common],
        description="Tune connected cruise controller gains and information "
                    "delays for energy efficiency from traffic spectra.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add("generate", help="write synthetic multi-vehicle datasets")
    p.add_argument("--count", type=int, default=101)
    p.set_defaults(func=cmd_generate)

    p = add("ingest", help="validate and normalize an external CSV")
    p.add_argument("input")
    p.add_argument("--target-dt", type=float, default=None)
    p.set_defaults(func=cmd_ingest)

    p = add("estimate", help="cross-spectral matrix of a trajectory")
    p.add_argument("input")
    p.add_argument("--indices", default="1,8")
    p.set_defaults(func=cmd_estimate)

    p = add("tune", help="optimize gains and delays")
    p.add_argument("--input", help="observation trajectory CSV")
    p.set_defaults(func=cmd_tune)

    p = add("simulate", help="run the truck on a trajectory")
    p.add_argument("input")
    p.add_argument("--params", required=True, help="tune result JSON")
    p.set_defaults(func=cmd_simulate)

    p = add("stability", help="plant-stable gain interval")
    p.add_argument("--sigma-min", type=float, default=0.05)
    p.add_argument("--sigma-max", type=float, default=2.0)
    p.add_argument("--points", type=int, default=79)
    p.set_defaults(func=cmd_stability)

    p = add("cross-eval", help="observation/testing study")
    p.add_argument("--datasets", type=int, default=101)
    p.add_argument("--data-dir", help="directory of pre-generated dataset CSVs")
    p.add_argument("--max-pairs", type=int, default=None)
    p.set_defaults(func=cmd_cross_eval)

    p = add("delay-study", help="benefit of the intentional delays")
    p.add_argument("--datasets", type=int, default=101)
    p.add_argument("--data-dir")
    p.add_argument("--max-pairs", type=int, default=None)
    p.set_defaults(func=cmd_delay_study)

    p = add("leader-sweep", help="vary the connected vehicle index")
    p.add_argument("--datasets", type=int, default=101)
    p.add_argument("--data-dir")
    p.add_argument("--l-min", type=int, default=2)
    p.add_argument("--l-max", type=int, default=8)
    p.add_argument("--max-pairs", type=int, default=100)
    p.set_defaults(func=cmd_leader_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, val in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, val)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config)
    args.func(args, cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
