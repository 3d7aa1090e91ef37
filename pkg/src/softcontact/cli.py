"""Command line front end: simulate, train, run, experiment."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import contact, fcm, logio
from .estimator import MeasurementNoise
from .experiments import (
    EXPERIMENT_NAMES,
    clustering_gates,
    fixed_gates,
    initial_state,
    run_experiment,
    run_filter,
)
from .features import DOF_NAMES
from .runconfig import RunConfig, load_config
from .scenario import (
    ScenarioError,
    fast_gait,
    flat_terrain,
    mixed_gait,
    patch_terrain,
    rough_terrain,
    run_scenario,
    slow_gait,
)
from .sensors import corrupt_log
from .estimator import evaluate_errors


def _gait_for(cfg: RunConfig):
    maker = {"fast": fast_gait, "slow": slow_gait, "mixed": mixed_gait}
    if cfg.gait not in maker:
        raise ValueError(f"unknown gait {cfg.gait!r}")
    return maker[cfg.gait](duration=cfg.duration, mode=cfg.mode)


def _terrain_for(cfg: RunConfig):
    if cfg.terrain == "flat":
        length = max(40.0, cfg.duration * 0.5 + 5.0)
        return flat_terrain(length=length)
    if cfg.terrain == "rough":
        n_patches = int(np.ceil((cfg.duration / 0.55 + 4) * 0.2 / 1.2)) + 2
        return rough_terrain(n_patches=n_patches)
    if cfg.terrain == "patch":
        return patch_terrain()
    raise ValueError(f"unknown terrain {cfg.terrain!r}")


def _noise_cfg(cfg: RunConfig) -> MeasurementNoise:
    r_rot = cfg.r_orientation if cfg.r_orientation > 0 else None
    return MeasurementNoise(r_nominal=cfg.r_nominal, alpha=cfg.alpha,
                            r_orientation=r_rot)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    truth = run_scenario(_gait_for(cfg), _terrain_for(cfg), seed=cfg.seed)
    sensors = corrupt_log(truth, cfg.noise_spec())
    os.makedirs(cfg.out_dir, exist_ok=True)
    truth_path = os.path.join(cfg.out_dir, "truth.csv")
    sensor_path = os.path.join(cfg.out_dir, "sensors.csv")
    episodes_path = os.path.join(cfg.out_dir, "episodes.csv")
    logio.write_truth_csv(truth, truth_path)
    logio.write_sensor_csv(sensors, sensor_path)
    logio.write_episodes_csv(truth.episodes, episodes_path)
    print(f"wrote {truth_path} ({len(truth)} rows)")
    print(f"wrote {sensor_path} ({len(sensors)} rows)")
    print(f"wrote {episodes_path} ({len(truth.episodes)} episodes)")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    histories = []
    for path in args.sensors:
        log = logio.read_sensor_csv(path)
        histories.extend([log.history(0), log.history(1)])
    fcm_cfg = fcm.FcmConfig(
        num_clusters=2, fuzziness=cfg.fuzziness, tolerance=cfg.tolerance,
        max_iterations=cfg.max_iterations, rng_seed=cfg.fcm_seed,
    )
    model = contact.train(histories, fcm_cfg, window=cfg.window, stride=cfg.stride)
    contact.save_model(model, args.out)
    for dof in DOF_NAMES:
        dm = model.dofs[dof]
        print(f"dof {dof}: {dm.iterations_used} iterations, final cost {dm.final_cost:.6g}")
    print(f"wrote {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    sensors = logio.read_sensor_csv(args.sensors)
    truth = logio.read_truth_csv(args.truth)
    noise = _noise_cfg(cfg)
    if cfg.estimator == "clustering":
        model = contact.load_model(args.model)
        gates, meas_var, probs = clustering_gates(model, sensors, noise,
                                                  wrench_only=cfg.wrench_only)
    elif cfg.estimator == "fixed":
        gates, meas_var, probs = fixed_gates(sensors, cfg.threshold, noise)
    else:
        raise ValueError(f"unknown estimator {cfg.estimator!r}")
    result = run_filter(sensors, gates, meas_var, initial_state(truth))
    errors = evaluate_errors(result, truth)
    if args.out:
        logio.write_estimate_csv(result, probs, args.out)
        print(f"wrote {args.out}")
    print("rmse_x rmse_y rmse_z rmse_yaw")
    print("%.6g %.6g %.6g %.6g" % (errors["x"], errors["y"], errors["z"], errors["yaw"]))
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    rows = run_experiment(
        args.name,
        duration=cfg.duration,
        trial_seeds=cfg.trial_seeds(),
        noise=_noise_cfg(cfg),
        fcm_seed=cfg.fcm_seed,
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    out = os.path.join(cfg.out_dir, f"{args.name}.csv")
    logio.write_experiment_csv(rows, out)
    print(f"wrote {out}")
    for row in rows:
        if row["trial"] == "mean":
            print(
                "%-24s pos3d %.5g  x %.5g  y %.5g  z %.5g  yaw %.5g"
                % (row["condition"], row["pos3d"], row["x"], row["y"],
                   row["z"], row["yaw"])
            )
    return 0


def _overrides(args) -> dict:
    keys = (
        "duration", "terrain", "gait", "mode", "seed", "noise_seed",
        "window", "stride", "fuzziness", "fcm_seed", "estimator", "threshold",
        "r_nominal", "alpha", "wrench_only", "trials", "first_trial_seed",
        "out_dir",
    )
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


def _add_common(p):
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.add_argument("--seed", type=int, default=None, help="scenario seed")
    p.add_argument("--noise-seed", dest="noise_seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None, help="seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softcontact",
        description="Contact probability clustering and base state estimation studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate truth and sensor CSV logs")
    _add_common(p)
    p.add_argument("--terrain", choices=("flat", "rough", "patch"), default=None)
    p.add_argument("--gait", choices=("fast", "slow", "mixed"), default=None)
    p.add_argument("--mode", choices=("walk", "walk_in_place"), default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit a contact model from sensor logs")
    _add_common(p)
    p.add_argument("sensors", nargs="+", help="sensor CSV paths")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--fuzziness", type=float, default=None)
    p.add_argument("--fcm-seed", dest="fcm_seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="stream estimation over a sensor log")
    _add_common(p)
    p.add_argument("--model", default=None, help="model file (clustering estimator)")
    p.add_argument("--sensors", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--estimator", choices=("clustering", "fixed"), default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--wrench-only", dest="wrench_only", action="store_true",
                   default=None)
    p.add_argument("--out", default=None, help="estimate CSV to write")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="run a named multi-trial study")
    _add_common(p)
    p.add_argument("name", choices=EXPERIMENT_NAMES)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--first-trial-seed", dest="first_trial_seed", type=int,
                   default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
