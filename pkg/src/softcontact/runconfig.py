"""Plain-text key-value run configuration.

Files hold ``key = value`` lines; ``#`` starts a comment.  Every key can
also be overridden from the command line.  Unknown keys are an error so
typos fail loudly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .sensors import NoiseSpec


@dataclass
class RunConfig:
    # scenario
    duration: float = 60.0
    terrain: str = "rough"  # flat | rough | patch
    gait: str = "fast"  # fast | slow | mixed
    mode: str = "walk"  # walk | walk_in_place
    seed: int = 11  # scenario seed
    # sensor noise (Table defaults at 1 kHz)
    noise_seed: int = 100
    sigma_joint: float = 0.0001
    sigma_force: float = 2.0
    sigma_force_bias: float = 0.00316
    sigma_torque: float = 0.1
    sigma_torque_bias: float = 0.00316
    sigma_accel: float = 0.02467
    sigma_accel_bias: float = 0.00316
    sigma_gyro: float = 0.01653
    sigma_gyro_bias: float = 0.01954
    # clustering
    window: int = 20
    stride: int = 1
    fuzziness: float = 1.2
    tolerance: float = 1e-5
    max_iterations: int = 300
    fcm_seed: int = 5
    # estimation
    estimator: str = "clustering"  # clustering | fixed
    threshold: float = 200.0
    r_nominal: float = 0.005
    r_orientation: float = 0.0  # 0 means: use r_nominal
    alpha: float = 1.0
    wrench_only: bool = False
    # experiment
    trials: int = 10
    first_trial_seed: int = 100
    out_dir: str = "out"

    def noise_spec(self, seed=None) -> NoiseSpec:
        return NoiseSpec(
            joint_angle=self.sigma_joint,
            force=self.sigma_force,
            force_bias=self.sigma_force_bias,
            torque=self.sigma_torque,
            torque_bias=self.sigma_torque_bias,
            accel=self.sigma_accel,
            accel_bias=self.sigma_accel_bias,
            gyro=self.sigma_gyro,
            gyro_bias=self.sigma_gyro_bias,
            seed=self.noise_seed if seed is None else seed,
        )

    def trial_seeds(self):
        return tuple(range(self.first_trial_seed, self.first_trial_seed + self.trials))


def _coerce(value: str, target_type):
    if target_type is bool:
        return value.strip().lower() in ("1", "true", "yes", "on")
    return target_type(value.strip())


def load_config(path=None, overrides=None) -> RunConfig:
    """Config from an optional file plus a dict of overrides."""
    cfg = RunConfig()
    fields = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    types = {f.name: type(getattr(cfg, f.name)) for f in dataclasses.fields(RunConfig)}
    if path is not None:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in fields:
                    raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
                setattr(cfg, key, _coerce(value, types[key]))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in fields:
            raise ValueError(f"unknown config override {key!r}")
        setattr(cfg, key, value)
    return cfg
