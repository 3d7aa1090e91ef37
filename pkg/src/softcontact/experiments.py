"""Experiment harness: scenario builders, trial running, aggregation.

Each experiment fixes its walking trajectories (scenario seeds) and varies
the sensor noise seed across trials, so conditions are compared on
identical contact events.  Results are mean/std-aggregated per condition
over the trial seeds; reruns with the same configuration are byte
reproducible.
"""

from __future__ import annotations

import numpy as np

from . import contact, fcm
from .estimator import (
    BaseState,
    EstimatorConfig,
    MeasurementNoise,
    evaluate_errors,
    run_filter,
)
from .scenario import (
    GaitScript,
    PhysicsConfig,
    fast_gait,
    flat_terrain,
    mixed_gait,
    patch_terrain,
    rough_terrain,
    run_scenario,
    slow_gait,
)
from .sensors import NoiseSpec, SensorLog, corrupt_log

EXPERIMENT_NAMES = (
    "threshold_sweep",
    "cluster_vs_fixed",
    "train_generalization",
    "gait_generalization",
    "imu_ablation",
)

THRESHOLD_SWEEP_N = (10.0, 40.0, 100.0, 200.0, 400.0)
BASELINE_THRESHOLD = 200.0

# fixed scenario seeds: training and test walks differ but stay identical
# across trials and conditions
TRAIN_ROUGH_SEED = 7
TEST_ROUGH_SEED = 11
TRAIN_FLAT_SEED = 21
TRAIN_GAIT_SEEDS = {"fast": 31, "slow": 32, "mixed": 33}
TEST_MIXED_SEED = 41
TRAIN_NOISE_SEED = 900


def rough_walk_log(duration=60.0, seed=TEST_ROUGH_SEED, physics=None):
    """Fast-gait walk over flat ground with raised low-friction patches."""
    steps = duration / 0.55 + 4
    n_patches = int(np.ceil(steps * 0.2 / 1.2)) + 2
    return run_scenario(
        fast_gait(duration), rough_terrain(n_patches=n_patches), physics, seed
    )


def flat_walk_log(gait_name="fast", duration=60.0, seed=TRAIN_FLAT_SEED, physics=None):
    gait = {"fast": fast_gait, "slow": slow_gait, "mixed": mixed_gait}[gait_name](duration)
    cycle = gait.single_support + gait.double_support
    length = max(40.0, duration / cycle * gait.step_length * 1.5 + 4.0)
    return run_scenario(gait, flat_terrain(length=length), physics, seed)


def flat_inplace_log(duration=60.0, seed=TRAIN_FLAT_SEED, physics=None):
    return run_scenario(
        fast_gait(duration, mode="walk_in_place"), flat_terrain(length=2.0),
        physics, seed,
    )


def patch_inplace_mixed_log(duration=60.0, seed=TEST_MIXED_SEED, physics=None):
    return run_scenario(
        mixed_gait(duration, mode="walk_in_place"), patch_terrain(extent=2.0),
        physics, seed,
    )


def train_model(sensor_logs, fcm_seed=5, window=20, stride=1, fuzziness=1.2):
    """Train a contact model from the pooled per-foot histories of logs."""
    histories = []
    for log in sensor_logs:
        histories.extend([log.history(0), log.history(1)])
    cfg = fcm.FcmConfig(num_clusters=2, fuzziness=fuzziness, rng_seed=fcm_seed)
    return contact.train(histories, cfg, window=window, stride=stride)


def clustering_gates(model, sensor_log: SensorLog, noise: MeasurementNoise,
                     wrench_only=False):
    """Per-tick gates and measurement variances from contact probabilities.

    Returns (gates (n,2), meas_var (n,2,6), probabilities (n,2,6)).
    """
    n = len(sensor_log)
    gates = np.zeros((n, 2), dtype=bool)
    meas_var = np.zeros((n, 2, 6))
    probs = np.zeros((n, 2, 6))
    r2 = noise.r_vector**2
    for f in (0, 1):
        p = contact.probability_series(model, sensor_log.history(f), wrench_only)
        probs[:, f] = p
        gates[:, f] = np.all(p > 0.5, axis=1)
        meas_var[:, f] = r2 + noise.alpha * (1.0 - p)
    return gates, meas_var, probs


def fixed_gates(sensor_log: SensorLog, threshold: float, noise: MeasurementNoise):
    """Fixed normal-force-threshold gating with constant covariance."""
    n = len(sensor_log)
    gates = sensor_log.force[:, :, 2] > threshold
    meas_var = np.broadcast_to(noise.r_vector**2, (n, 2, 6)).copy()
    probs = np.full((n, 2, 6), 0.5)
    return gates, meas_var, probs


def initial_state(truth) -> BaseState:
    return BaseState(
        pos=truth.base_pos[0].copy(),
        vel=truth.base_vel[0].copy(),
        quat=truth.base_quat[0].copy(),
        foot_pos=truth.foot_pos[0].copy(),
        foot_quat=truth.foot_quat[0].copy(),
    )


def run_trial(
    truth,
    sensor_log: SensorLog,
    estimator_kind: str,
    model=None,
    threshold: float = BASELINE_THRESHOLD,
    noise: MeasurementNoise = MeasurementNoise(),
    wrench_only: bool = False,
    est_config: EstimatorConfig = EstimatorConfig(),
):
    """One estimation run; returns (errors dict, FilterResult, probs)."""
    if estimator_kind == "clustering":
        if model is None:
            raise ValueError("clustering estimator needs a trained model")
        gates, meas_var, probs = clustering_gates(model, sensor_log, noise, wrench_only)
    elif estimator_kind == "fixed":
        gates, meas_var, probs = fixed_gates(sensor_log, threshold, noise)
    else:
        raise ValueError(f"unknown estimator {estimator_kind!r}")
    result = run_filter(sensor_log, gates, meas_var, initial_state(truth), est_config)
    return evaluate_errors(result, truth), result, probs


def _condition_rows(name, condition, truth, trial_seeds, runner):
    """Run one condition over all trial seeds and append mean/std rows."""
    rows = []
    dims = ("x", "y", "z", "yaw", "pos3d")
    values = []
    for seed in trial_seeds:
        sensor_log = corrupt_log(truth, NoiseSpec(seed=seed))
        errors = runner(sensor_log)
        values.append([errors[d] for d in dims])
        rows.append(
            {"experiment": name, "condition": condition, "trial": seed,
             **{d: errors[d] for d in dims}}
        )
    arr = np.asarray(values)
    rows.append(
        {"experiment": name, "condition": condition, "trial": "mean",
         **dict(zip(dims, arr.mean(axis=0)))}
    )
    rows.append(
        {"experiment": name, "condition": condition, "trial": "std",
         **dict(zip(dims, arr.std(axis=0, ddof=1)))}
    )
    return rows


def run_experiment(
    name: str,
    duration: float = 60.0,
    trial_seeds=tuple(range(100, 110)),
    noise: MeasurementNoise = MeasurementNoise(),
    fcm_seed: int = 5,
    physics: PhysicsConfig | None = None,
):
    """Run one named study; returns aggregation rows for the CSV writer."""
    if name not in EXPERIMENT_NAMES:
        raise ValueError(
            f"unknown experiment {name!r}; expected one of {EXPERIMENT_NAMES}"
        )
    rows = []
    if name == "threshold_sweep":
        truth = rough_walk_log(duration, TEST_ROUGH_SEED, physics)
        for thr in THRESHOLD_SWEEP_N:
            rows += _condition_rows(
                name, f"fixed_{int(thr)}N", truth, trial_seeds,
                lambda s, thr=thr: run_trial(truth, s, "fixed", threshold=thr,
                                             noise=noise)[0],
            )
    elif name == "cluster_vs_fixed":
        truth_train = rough_walk_log(duration, TRAIN_ROUGH_SEED, physics)
        model = train_model(
            [corrupt_log(truth_train, NoiseSpec(seed=TRAIN_NOISE_SEED))],
            fcm_seed=fcm_seed,
        )
        truth = rough_walk_log(duration, TEST_ROUGH_SEED, physics)
        rows += _condition_rows(
            name, "clustering", truth, trial_seeds,
            lambda s: run_trial(truth, s, "clustering", model=model, noise=noise)[0],
        )
        rows += _condition_rows(
            name, f"fixed_{int(BASELINE_THRESHOLD)}N", truth, trial_seeds,
            lambda s: run_trial(truth, s, "fixed", threshold=BASELINE_THRESHOLD,
                                noise=noise)[0],
        )
    elif name == "train_generalization":
        truth_rough = rough_walk_log(duration, TRAIN_ROUGH_SEED, physics)
        truth_flat = flat_inplace_log(duration, TRAIN_FLAT_SEED, physics)
        model_rough = train_model(
            [corrupt_log(truth_rough, NoiseSpec(seed=TRAIN_NOISE_SEED))],
            fcm_seed=fcm_seed,
        )
        model_flat = train_model(
            [corrupt_log(truth_flat, NoiseSpec(seed=TRAIN_NOISE_SEED + 1))],
            fcm_seed=fcm_seed,
        )
        truth = rough_walk_log(duration, TEST_ROUGH_SEED, physics)
        for cond, model in (("trained_rough", model_rough), ("trained_flat", model_flat)):
            rows += _condition_rows(
                name, cond, truth, trial_seeds,
                lambda s, m=model: run_trial(truth, s, "clustering", model=m,
                                             noise=noise)[0],
            )
    elif name == "gait_generalization":
        models = {}
        for gait_name, seed in TRAIN_GAIT_SEEDS.items():
            truth_g = flat_walk_log(gait_name, duration, seed, physics)
            models[gait_name] = train_model(
                [corrupt_log(truth_g, NoiseSpec(seed=TRAIN_NOISE_SEED + seed))],
                fcm_seed=fcm_seed,
            )
        truth = patch_inplace_mixed_log(duration, TEST_MIXED_SEED, physics)
        for gait_name, model in models.items():
            rows += _condition_rows(
                name, f"trained_{gait_name}", truth, trial_seeds,
                lambda s, m=model: run_trial(truth, s, "clustering", model=m,
                                             noise=noise)[0],
            )
        rows += _condition_rows(
            name, f"fixed_{int(BASELINE_THRESHOLD)}N", truth, trial_seeds,
            lambda s: run_trial(truth, s, "fixed", threshold=BASELINE_THRESHOLD,
                                noise=noise)[0],
        )
    elif name == "imu_ablation":
        truth_train = rough_walk_log(duration, TRAIN_ROUGH_SEED, physics)
        model = train_model(
            [corrupt_log(truth_train, NoiseSpec(seed=TRAIN_NOISE_SEED))],
            fcm_seed=fcm_seed,
        )
        truth = rough_walk_log(duration, TEST_ROUGH_SEED, physics)
        for cond, wo in (("with_imu", False), ("wrench_only", True)):
            rows += _condition_rows(
                name, cond, truth, trial_seeds,
                lambda s, wo=wo: run_trial(truth, s, "clustering", model=model,
                                           noise=noise, wrench_only=wo)[0],
            )
    return rows


def condition_means(rows, dim: str = "pos3d") -> dict:
    """condition -> mean RMSE of one dimension, from aggregation rows."""
    return {
        r["condition"]: r[dim] for r in rows if r["trial"] == "mean"
    }
