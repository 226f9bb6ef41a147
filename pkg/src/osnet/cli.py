"""Command-line driver.

Exit status: 0 success, 2 configuration error, 3 numerical divergence,
4 input/output error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import plotting
from .config import PRESETS, ConfigError, ExperimentConfig, deep_merge, preset, set_dotted
from .experiment import (analyze, generate_data, ground_truth_run, initial_net, rollout,
                         section_from_config)
from .io import fmt, read_trajectory_csv, write_crossings_csv, write_json, write_trajectory_csv
from .model import as_field, checkpoint_dict, load_checkpoint, net_from_dict, save_checkpoint
from .ode import DivergenceError, Trajectory, integrate
from .systems import make_field
from .train import train

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

# named flag -> dotted config key
_FLAGS = {
    "seed": "seed",
    "alpha": "train.alpha",
    "epochs": "train.epochs",
    "h": "train.h",
    "warmup_epochs": "train.warmup_epochs",
    "inner_iterations": "train.lbfgs.inner_iterations",
    "hidden": "model.hidden_2m",
    "t0": "data.t0",
    "t1": "data.t1",
    "gen_step": "data.gen_step",
    "stride": "data.snapshot_stride",
    "rollout_horizon": "analysis.rollout_horizon",
    "long_horizon": "analysis.long_horizon",
}


class InputError(Exception):
    """An input file is missing or malformed."""


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


# --- configuration -----------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_config(args) -> ExperimentConfig:
    """Preset, then config file, then command-line flags."""
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except OSError as err:
            raise InputError(f"cannot read config {args.config}: {err}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"config {args.config} is not valid JSON: {err}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    name = args.preset or file_cfg.pop("preset", None) or "rossler6"
    file_cfg.pop("preset", None)
    raw = deep_merge(preset(name), file_cfg)
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        set_dotted(raw, key, _parse_value(value))
    for flag, key in _FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            set_dotted(raw, key, value)
    return ExperimentConfig.from_dict(raw)


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration (flags > --config file > --preset)")
    g.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment (default rossler6)")
    g.add_argument("--config", help="JSON config file overriding the preset")
    g.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="dotted override, e.g. train.lbfgs.history=50 (repeatable)")
    g.add_argument("--seed", type=int)
    g.add_argument("--alpha", type=float, help="regularization weight")
    g.add_argument("--epochs", type=int)
    g.add_argument("--h", type=float, help="model RK4 step")
    g.add_argument("--warmup-epochs", type=int)
    g.add_argument("--inner-iterations", type=int)
    g.add_argument("--hidden", type=int, help="hidden width 2m")
    g.add_argument("--t0", type=float)
    g.add_argument("--t1", type=float)
    g.add_argument("--gen-step", type=float)
    g.add_argument("--stride", type=int, help="snapshot stride")
    g.add_argument("--rollout-horizon", type=float)
    g.add_argument("--long-horizon", type=float)
    return p


# --- file helpers ------------------------------------------------------------

def _read_csv(path) -> Trajectory:
    try:
        return read_trajectory_csv(path)
    except OSError as err:
        raise InputError(f"cannot read {path}: {err}") from None
    except ValueError as err:
        raise InputError(str(err)) from None


def _read_checkpoint(path):
    try:
        return load_checkpoint(path)
    except OSError as err:
        raise InputError(f"cannot read {path}: {err}") from None
    except (ValueError, KeyError, TypeError) as err:
        raise InputError(f"{path}: malformed checkpoint ({err!r})") from None


def _parse_vector(text: str, dim: int) -> np.ndarray:
    try:
        vec = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r}") from None
    if vec.shape != (dim,):
        raise ConfigError(f"expected {dim} comma-separated values, got {text!r}")
    return vec


def _out_dir(path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _bounding_box(traj: Trajectory) -> str:
    lo, hi = traj.states.min(axis=0), traj.states.max(axis=0)
    return " ".join(f"x{i}=[{a:.6g}, {b:.6g}]" for i, (a, b) in enumerate(zip(lo, hi)))


def _load_data(args, cfg: ExperimentConfig) -> Trajectory:
    if getattr(args, "data", None):
        data = _read_csv(args.data)
        if data.dim != cfg.system.dim:
            raise ConfigError(f"data has {data.dim} components but {cfg.system.name} has {cfg.system.dim}")
        return data
    return generate_data(cfg)


# --- commands ----------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = resolve_config(args)
    try:
        data = generate_data(cfg)
    except DivergenceError as err:
        _err(f"ground truth diverged at t={err.time:.17g}")
        return EXIT_DIVERGED
    write_trajectory_csv(args.out, data)
    print(f"samples: {len(data)}")
    print(f"bounding box: {_bounding_box(data)}")
    if not args.no_figures:
        plotting.plot_projection(Path(args.out).with_suffix(".svg"), data, ("x", "z"),
                                 f"{cfg.system.name} {cfg.system.params}")
    return EXIT_OK


def _log_epoch(rec) -> None:
    print(f"epoch {rec.epoch:3d}  window_end {rec.window_end:8.4g}  data {rec.data_loss:.6e}  "
          f"reg {rec.reg_value:.6e}  |g| {rec.gradient_norm:.3e}  evals {rec.line_search_evals}  "
          f"{rec.status}", flush=True)


def _train_payload(raw: dict, times, states, quiet: bool = True):
    """Train one config; module-level so it can run in a worker process."""
    cfg = ExperimentConfig.from_dict(raw)
    data = Trajectory(times, states)
    net0 = initial_net(cfg)
    net, report = train(net0, data, cfg.train, log=None if quiet else _log_epoch)
    return checkpoint_dict(net, cfg.seed, cfg.digest()), report


def _train_report_dict(cfg: ExperimentConfig, report) -> dict:
    d = report.to_dict()
    d["final"]["reference_j_a_norm"] = cfg.reference_j_a_norm
    d["final"]["config_hash"] = cfg.digest()
    return d


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    data = _load_data(args, cfg)
    out = _out_dir(args.out_dir)
    ck, report = _train_payload(cfg.raw, data.times, data.states, quiet=args.quiet)
    net = net_from_dict(ck)
    save_checkpoint(out / "checkpoint.json", net, cfg.seed, cfg.digest())
    write_json(out / "train_report.json", _train_report_dict(cfg, report))
    print(f"|J_a|_2 = {report.j_a_norm:.6g} (reference {cfg.reference_j_a_norm}), "
          f"normalized MSE = {report.normalized_mse}, wall time {report.wall_time:.1f} s")
    if not args.no_figures:
        epochs = report.to_dict()["epochs"]
        if epochs:
            plotting.plot_training_curve(out / "training_curve.svg", epochs)
        plotting.plot_matrix(out / "omega.svg", net.omega, "$\\Omega$")
        try:
            fit = integrate(as_field(net), data.states[0], data.times[0], data.times[-1], cfg.train.h)
            plotting.plot_overlay(out / "fit.svg", [data, fit], ["data", "OS-net"], "y")
        except DivergenceError:
            pass
    if report.diverged:
        _err("training diverged; see train_report.json")
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_rollout(args) -> int:
    cfg = resolve_config(args)
    net = _read_checkpoint(args.checkpoint)
    x0 = _parse_vector(args.ic, net.n) if args.ic else cfg.validation_ic
    if x0.shape != (net.n,):
        raise ConfigError("initial condition does not match the checkpoint dimension")
    horizon = cfg.rollout_horizon if args.horizon is None else args.horizon
    step = cfg.train.h if args.step is None else args.step
    if not horizon > 0 or not step > 0:
        raise ConfigError("horizon and step must be positive")
    try:
        traj = rollout(net, x0, horizon, step)
    except DivergenceError as err:
        if err.partial is not None:
            write_trajectory_csv(args.out, err.partial)
        _err(f"rollout diverged at t={err.time:.17g}; partial trajectory written to {args.out}")
        return EXIT_DIVERGED
    write_trajectory_csv(args.out, traj)
    print(f"samples: {len(traj)}  max |x| = {np.linalg.norm(traj.states, axis=1).max():.6g}")
    if not args.no_figures:
        plotting.plot_projection(Path(args.out).with_suffix(".svg"), traj, ("x", "z"))
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = resolve_config(args)
    net = _read_checkpoint(args.checkpoint) if args.checkpoint else None
    horizon = cfg.long_horizon if args.horizon is None else args.horizon
    if args.trajectory:
        traj = _read_csv(args.trajectory)
    elif args.ground_truth:
        traj = ground_truth_run(cfg, horizon)
    elif net is not None:
        traj = rollout(net, cfg.validation_ic, horizon, cfg.train.h)
    else:
        raise ConfigError("analyze needs --trajectory, --checkpoint or --ground-truth")
    if net is not None:
        field, h = as_field(net), cfg.train.h
    elif args.ground_truth:
        field, h = make_field(cfg.system), cfg.ground_truth_step
    else:
        field, h = None, cfg.ground_truth_step
    tol = cfg.cluster_tolerance if args.tolerance is None else args.tolerance
    horizon_T = cfg.t1 - cfg.t0 if args.horizon_T is None else args.horizon_T
    result = analyze(traj, field, h, net, horizon_T, section_from_config(cfg.section), tol,
                     args.skip_fraction)
    att = result.attractor
    out = _out_dir(args.out_dir)
    att_dict = att.to_dict()
    att_dict.pop("crossings")
    att_dict["n_crossings"] = len(att.crossings)
    if result.floquet is not None:
        fl = result.floquet
        att_dict["floquet"] = {"multipliers": fl.multipliers, "nontrivial_moduli": fl.nontrivial_moduli,
                               "stable": fl.stable, "note": fl.note}
    write_json(out / "attractor_report.json", att_dict)
    write_crossings_csv(out / "crossings.csv", att.crossings, traj.dim)
    if result.stability is not None:
        write_json(out / "stability_report.json", result.stability.to_dict())
    line = f"period: {att.detected_period_k}"
    if att.is_periodic:
        line += f"  T = {att.period_T:.6g}"
    if result.floquet is not None:
        moduli = ", ".join(f"{m:.4g}" for m in result.floquet.nontrivial_moduli)
        line += f"  nontrivial |mu| = [{moduli}]  stable = {result.floquet.stable}"
    print(line)
    if result.stability is not None:
        s = result.stability
        print(f"|J_a|_2 = {s.j_a_norm:.6g}  threshold 2/(LT) = {s.corollary_threshold:.6g}  "
              f"satisfied = {s.corollary_satisfied}")
    if not args.no_figures:
        keep = traj.times >= traj.times[0] + att.section["transient_skip"]
        tail = Trajectory(traj.times[keep], traj.states[keep]) if keep.sum() > 1 else traj
        plotting.plot_projection(out / "attractor.svg", tail, ("x", "z"))
        if len(att.crossings) >= 2:
            pts = np.array([c.point for c in att.crossings])
            plotting.plot_return_map(out / "return_map.svg", pts[:, int(np.argmax(pts.var(axis=0)))])
    return EXIT_OK


def cmd_plot(args) -> int:
    trajs = [_read_csv(p) for p in args.inputs]
    labels = args.labels.split(",") if args.labels else [Path(p).stem for p in args.inputs]
    if len(labels) != len(trajs):
        raise ConfigError("need one label per input")
    try:
        if args.mode == "overlay":
            plotting.plot_overlay(args.out, trajs, labels, args.component)
        else:
            if len(trajs) != 1:
                raise ConfigError("projection takes exactly one trajectory")
            axes = tuple(args.axes.split(","))
            if len(axes) != 2:
                raise ConfigError("--axes expects two names, e.g. x,z")
            plotting.plot_projection(args.out, trajs[0], axes)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return EXIT_OK


def cmd_preset_dump(args) -> int:
    text = json.dumps(preset(args.name), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


_ABLATION_COLUMNS = ["variant", "alpha", "j_a_norm", "reference_j_a_norm", "normalized_mse",
                     "train_diverged", "rollout_horizon", "rollout_status", "rollout_max_norm",
                     "failure_time"]


def cmd_ablation(args) -> int:
    """Train with the configured alpha and with alpha = 0, then compare rollouts."""
    cfg = resolve_config(args)
    data = _load_data(args, cfg)
    out = _out_dir(args.out_dir)
    ablated_raw = deep_merge(cfg.raw, {"train": {"alpha": 0.0}})
    variants = [("regularized", cfg.raw), ("ablated", ablated_raw)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, 2)) as pool:
            futures = [pool.submit(_train_payload, raw, data.times, data.states) for _, raw in variants]
            results = [f.result() for f in futures]
    else:
        results = [_train_payload(raw, data.times, data.states, quiet=args.quiet) for _, raw in variants]

    horizon = cfg.rollout_horizon if args.horizon is None else args.horizon
    rows, rollouts = [], {}
    for (name, raw), (ck, report) in zip(variants, results):
        vcfg = ExperimentConfig.from_dict(raw)
        vdir = _out_dir(out / name)
        net = net_from_dict(ck)
        save_checkpoint(vdir / "checkpoint.json", net, vcfg.seed, vcfg.digest())
        write_json(vdir / "train_report.json", _train_report_dict(vcfg, report))
        status, max_norm, t_fail = "ok", float("nan"), float("nan")
        try:
            traj = rollout(net, cfg.validation_ic, horizon, cfg.train.h)
        except DivergenceError as err:
            status, t_fail, traj = "diverged", err.time, err.partial
        if traj is not None:
            write_trajectory_csv(vdir / "rollout.csv", traj)
            max_norm = float(np.linalg.norm(traj.states, axis=1).max())
            rollouts[name] = traj
        rows.append({"variant": name, "alpha": vcfg.train.alpha, "j_a_norm": report.j_a_norm,
                     "reference_j_a_norm": cfg.reference_j_a_norm,
                     "normalized_mse": report.normalized_mse, "train_diverged": report.diverged,
                     "rollout_horizon": horizon, "rollout_status": status,
                     "rollout_max_norm": max_norm, "failure_time": t_fail})

    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_ABLATION_COLUMNS)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, float) else ("" if v is None else v)
                        for v in (r[c] for c in _ABLATION_COLUMNS)])
    for r in rows:
        print(f"{r['variant']:12s} alpha={r['alpha']:<6g} |J_a|_2={r['j_a_norm']:.6g}  "
              f"rollout {r['rollout_status']}")
    if not args.no_figures and rollouts:
        # the true system from the same perturbed start, for reference
        truth = integrate(make_field(cfg.system), cfg.validation_ic, 0.0, horizon, cfg.ground_truth_step)
        plotting.plot_overlay(out / "ablation.svg", [truth] + list(rollouts.values()),
                              ["truth"] + list(rollouts), "y")
    if rows[1]["rollout_status"] == "diverged":
        _err(f"ablated rollout diverged at t={rows[1]['failure_time']:.17g}")
        return EXIT_DIVERGED
    return EXIT_OK


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osnet", description="Learn and analyze periodic dynamics with OS-net.")
    sub = parser.add_subparsers(dest="command", required=True)
    cfgp = _config_parent()

    p = sub.add_parser("generate", parents=[cfgp], help="simulate ground truth and write snapshot CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[cfgp], help="fit OS-net to snapshot data")
    p.add_argument("--data", help="snapshot CSV (generated from the config when omitted)")
    p.add_argument("--out-dir", default="run")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rollout", parents=[cfgp], help="integrate a trained model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ic", help="comma-separated initial state (default: perturbed config IC)")
    p.add_argument("--horizon", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("analyze", parents=[cfgp], help="period detection and stability diagnostics")
    p.add_argument("--trajectory", help="trajectory CSV to analyze")
    p.add_argument("--checkpoint", help="trained model (adds the norm bound and Floquet analysis)")
    p.add_argument("--ground-truth", action="store_true",
                   help="analyze a long ground-truth run of the configured system")
    p.add_argument("--horizon", type=float, help="length of generated runs (default long_horizon)")
    p.add_argument("--tolerance", type=float, help="relative cluster tolerance")
    p.add_argument("--skip-fraction", type=float, default=0.2, help="transient fraction to skip")
    p.add_argument("--horizon-T", type=float, help="T in the norm bound (default data duration)")
    p.add_argument("--out-dir", default="analysis")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plot", help="render trajectory CSVs to SVG")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--mode", choices=["overlay", "projection"], default="overlay")
    p.add_argument("--component", default="y", help="state axis for overlays")
    p.add_argument("--axes", default="x,z", help="two axes for projections")
    p.add_argument("--labels", help="comma-separated legend labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("preset-dump", help="print a built-in preset as JSON")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out")
    p.set_defaults(func=cmd_preset_dump)

    p = sub.add_parser("ablation", parents=[cfgp], help="regularized vs alpha=0 comparison")
    p.add_argument("--data")
    p.add_argument("--out-dir", default="ablation")
    p.add_argument("--horizon", type=float, help="comparison rollout length (default rollout_horizon)")
    p.add_argument("--jobs", type=int, default=1, help="train both variants in parallel when > 1")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_ablation)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as err:
        _err(str(err))
        return EXIT_DIVERGED
    except InputError as err:
        _err(str(err))
        return EXIT_IO
    except OSError as err:
        _err(str(err))
        return EXIT_IO
    except (ConfigError, LookupError, ValueError) as err:
        _err(str(err))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
