"""Sensor corruption: white noise plus random-walk biases per channel.

Wrench channels add a bias and a Gaussian draw to the true values.  IMU
channels first map world-frame motion through the sensor frame; the
accelerometer reports ``R (a_w + g) + b + w`` with gravity pointing along
+z at 9.81 m/s^2, so a stationary, level sensor reads +9.81 on its z axis.

Bias increments use the discrete-rate convention: one step adds a draw of
standard deviation ``sigma_bias * dt``, so the bias variance after time t
is ``sigma_bias^2 * dt * t``.  Each channel of each endeffector owns an
independent seeded stream (PCG64, split from the spec seed), so disabling
or reseeding one channel never shifts the draws of another.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import ImuSample, SampleHistory, WrenchSample
from .scenario import GroundTruthLog

GRAVITY_W = np.array([0.0, 0.0, 9.81])

#: Equivalent lever arms mapping joint-angle noise onto the relative
#: foot pose measured through leg kinematics.
KIN_POS_SCALE = 1.0  # m of foot position error per rad of joint noise
KIN_ROT_SCALE = 2.0  # rad of foot orientation error per rad of joint noise

#: Leg flex under load: forward kinematics assumes the leg carries its
#: nominal deflection, so the measured relative foot pose is biased while
#: the foot is lightly loaded.  The bias fades to zero as the load reaches
#: FLEX_REF newtons.
FLEX_OFFSET = np.array([0.005, 0.0, 0.009])  # m, base frame, at zero load
FLEX_REF = 250.0  # N

#: The floating-base IMU is a better grade than the strap-on endeffector
#: units: same white noise, much slower bias walks.
BASE_ACCEL_BIAS_WALK = 0.00316  # m/s^3 discrete at 1 kHz
BASE_GYRO_BIAS_WALK = 0.01954  # rad/s^2


@dataclass(frozen=True)
class NoiseSpec:
    """Discrete per-sample noise standard deviations at 1 kHz."""

    joint_angle: float = 0.0001  # rad
    force: float = 2.0  # N
    force_bias: float = 0.00316  # N/s
    torque: float = 0.1  # N m
    torque_bias: float = 0.00316  # N m/s
    accel: float = 0.02467  # m/s^2
    accel_bias: float = 0.00316  # m/s^3
    gyro: float = 0.01653  # rad/s
    gyro_bias: float = 0.01954  # rad/s^2
    seed: int = 0

    def __post_init__(self):
        for name in (
            "joint_angle", "force", "force_bias", "torque", "torque_bias",
            "accel", "accel_bias", "gyro", "gyro_bias",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def zero(cls, seed: int = 0) -> "NoiseSpec":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, seed)


@dataclass
class BiasState:
    """Current random-walk bias of one endeffector's sensors."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("force", "torque", "accel", "gyro"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"bias {name} must be a finite 3-vector")
            setattr(self, name, arr)


def step_bias(bias: BiasState, spec: NoiseSpec, dt: float, rng) -> BiasState:
    """Advance all bias walks by one step of length ``dt``.

    Draw order is fixed (force, torque, accel, gyro; three axes each) so a
    given generator state always produces the same walk.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    return BiasState(
        force=bias.force + rng.normal(0.0, spec.force_bias * dt, 3),
        torque=bias.torque + rng.normal(0.0, spec.torque_bias * dt, 3),
        accel=bias.accel + rng.normal(0.0, spec.accel_bias * dt, 3),
        gyro=bias.gyro + rng.normal(0.0, spec.gyro_bias * dt, 3),
    )


def corrupt_wrench(true: WrenchSample, bias: BiasState, spec: NoiseSpec, rng) -> WrenchSample:
    """Measured wrench: true value plus bias plus white noise per axis."""
    return WrenchSample(
        force=np.asarray(true.force, dtype=np.float64)
        + bias.force + rng.normal(0.0, spec.force, 3),
        torque=np.asarray(true.torque, dtype=np.float64)
        + bias.torque + rng.normal(0.0, spec.torque, 3),
    )


def corrupt_imu(accel_w, gyro_w, rot_w_imu, bias: BiasState, spec: NoiseSpec, rng) -> ImuSample:
    """Measured IMU outputs for world-frame motion seen from a sensor frame.

    ``rot_w_imu`` maps world vectors into the sensor frame and must be a
    rotation matrix (orthonormal within 1e-9).
    """
    r = np.asarray(rot_w_imu, dtype=np.float64)
    if r.shape != (3, 3) or np.abs(r @ r.T - np.eye(3)).max() > 1e-9 or np.linalg.det(r) < 0:
        raise ValueError("rot_w_imu must be an orthonormal rotation matrix")
    a = r @ (np.asarray(accel_w, dtype=np.float64) + GRAVITY_W)
    w = r @ np.asarray(gyro_w, dtype=np.float64)
    return ImuSample(
        accel=a + bias.accel + rng.normal(0.0, spec.accel, 3),
        gyro=w + bias.gyro + rng.normal(0.0, spec.gyro, 3),
    )


@dataclass
class SensorLog:
    """Corrupted measurements of one scenario run."""

    dt: float
    time: np.ndarray
    base_accel: np.ndarray  # (n, 3) base IMU accelerometer
    base_gyro: np.ndarray  # (n, 3)
    force: np.ndarray  # (n, 2, 3) per-foot wrench sensor
    torque: np.ndarray  # (n, 2, 3)
    foot_accel: np.ndarray  # (n, 2, 3) per-foot IMU
    foot_gyro: np.ndarray  # (n, 2, 3)
    kin_pos: np.ndarray  # (n, 2, 3) relative foot position from kinematics
    kin_quat: np.ndarray  # (n, 2, 4) relative foot orientation

    def __len__(self):
        return self.time.shape[0]

    def history(self, foot: int) -> SampleHistory:
        """Measured wrench+IMU history of one foot, ready for clustering."""
        return SampleHistory(
            forces=self.force[:, foot],
            torques=self.torque[:, foot],
            accels=self.foot_accel[:, foot],
            gyros=self.foot_gyro[:, foot],
            sample_period=self.dt,
        )


def _bias_path(rng, sigma: float, n: int, dt: float) -> np.ndarray:
    """Cumulative random walk, one (n, 3) path; equals repeated step_bias."""
    if sigma == 0.0:
        # keep the stream length independent of sigma
        rng.normal(0.0, 1.0, (n, 3))
        return np.zeros((n, 3))
    return np.cumsum(rng.normal(0.0, sigma * dt, (n, 3)), axis=0)


def _quat_mult_series(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Hamilton product of (n, 4) scalar-first quaternion stacks."""
    a0, a1, a2, a3 = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    b0, b1, b2, b3 = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=1,
    )


def _rotvec_to_quat_series(v: np.ndarray) -> np.ndarray:
    """Row-wise exponential map for (n, 3) rotation vectors."""
    angle = np.linalg.norm(v, axis=1)
    half = 0.5 * angle
    s = np.where(angle < 1e-12, 0.5, np.sin(half) / np.maximum(angle, 1e-300))
    q = np.empty((v.shape[0], 4))
    q[:, 0] = np.cos(half)
    q[:, 1:] = s[:, None] * v
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def _rotate_series(quats: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Apply world->frame rotation (conjugate of each quat) to each vector."""
    w, x, y, z = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
    # rows of R(q)^T
    r00 = 1 - 2 * (y * y + z * z)
    r01 = 2 * (x * y + w * z)
    r02 = 2 * (x * z - w * y)
    r10 = 2 * (x * y - w * z)
    r11 = 1 - 2 * (x * x + z * z)
    r12 = 2 * (y * z + w * x)
    r20 = 2 * (x * z + w * y)
    r21 = 2 * (y * z - w * x)
    r22 = 1 - 2 * (x * x + y * y)
    vx, vy, vz = vecs[:, 0], vecs[:, 1], vecs[:, 2]
    return np.stack(
        [
            r00 * vx + r01 * vy + r02 * vz,
            r10 * vx + r11 * vy + r12 * vz,
            r20 * vx + r21 * vy + r22 * vz,
        ],
        axis=1,
    )


def corrupt_log(truth: GroundTruthLog, spec: NoiseSpec) -> SensorLog:
    """Corrupt a whole ground-truth log into a sensor log.

    Streams are split per channel from ``spec.seed`` in a fixed order:
    per foot (force white/bias, torque white/bias, accel white/bias, gyro
    white/bias, kinematic position/orientation), then the base IMU
    (accel white/bias, gyro white/bias).
    """
    n = len(truth)
    dt = truth.dt
    streams = [
        np.random.default_rng(s)
        for s in np.random.SeedSequence(spec.seed).spawn(24)
    ]
    it = iter(streams)

    force = np.empty((n, 2, 3))
    torque = np.empty((n, 2, 3))
    foot_accel = np.empty((n, 2, 3))
    foot_gyro = np.empty((n, 2, 3))
    kin_pos = np.empty((n, 2, 3))
    kin_quat = np.empty((n, 2, 4))

    base_R_w = truth.base_quat  # world->base applied via conjugation
    for f in (0, 1):
        rf_w, rf_b = next(it), next(it)
        rt_w, rt_b = next(it), next(it)
        ra_w, ra_b = next(it), next(it)
        rw_w, rw_b = next(it), next(it)
        rk_p, rk_r = next(it), next(it)
        force[:, f] = (
            truth.force[:, f]
            + _bias_path(rf_b, spec.force_bias, n, dt)
            + rf_w.normal(0.0, spec.force, (n, 3))
        )
        torque[:, f] = (
            truth.torque[:, f]
            + _bias_path(rt_b, spec.torque_bias, n, dt)
            + rt_w.normal(0.0, spec.torque, (n, 3))
        )
        # foot IMU: world motion seen in the foot frame
        a_body = _rotate_series(truth.foot_quat[:, f], truth.foot_accel_w[:, f] + GRAVITY_W)
        w_body = _rotate_series(truth.foot_quat[:, f], truth.foot_angvel[:, f])
        foot_accel[:, f] = (
            a_body + _bias_path(ra_b, spec.accel_bias, n, dt)
            + ra_w.normal(0.0, spec.accel, (n, 3))
        )
        foot_gyro[:, f] = (
            w_body + _bias_path(rw_b, spec.gyro_bias, n, dt)
            + rw_w.normal(0.0, spec.gyro, (n, 3))
        )
        # kinematic relative pose from noisy joint angles, with the
        # load-dependent leg flex biasing the lightly loaded leg
        rel = truth.foot_pos[:, f] - truth.base_pos
        flex = np.maximum(1.0 - truth.force[:, f, 2] / FLEX_REF, 0.0)
        kin_pos[:, f] = (
            _rotate_series(base_R_w, rel)
            + flex[:, None] * FLEX_OFFSET
            + rk_p.normal(0.0, spec.joint_angle * KIN_POS_SCALE, (n, 3))
        )
        rot_noise = rk_r.normal(0.0, spec.joint_angle * KIN_ROT_SCALE, (n, 3))
        conj = truth.foot_quat[:, f] * np.array([1.0, -1.0, -1.0, -1.0])
        s_z = _quat_mult_series(truth.base_quat, conj)
        kin_quat[:, f] = _quat_mult_series(_rotvec_to_quat_series(rot_noise), s_z)

    rba_w, rba_b = next(it), next(it)
    rbg_w, rbg_b = next(it), next(it)
    base_ab = BASE_ACCEL_BIAS_WALK if spec.accel_bias > 0 else 0.0
    base_gb = BASE_GYRO_BIAS_WALK if spec.gyro_bias > 0 else 0.0
    base_accel = (
        _rotate_series(truth.base_quat, truth.base_accel_w + GRAVITY_W)
        + _bias_path(rba_b, base_ab, n, dt)
        + rba_w.normal(0.0, spec.accel, (n, 3))
    )
    base_gyro = (
        _rotate_series(truth.base_quat, truth.base_angvel)
        + _bias_path(rbg_b, base_gb, n, dt)
        + rbg_w.normal(0.0, spec.gyro, (n, 3))
    )
    return SensorLog(
        dt=dt, time=truth.time.copy(),
        base_accel=base_accel, base_gyro=base_gyro,
        force=force, torque=torque,
        foot_accel=foot_accel, foot_gyro=foot_gyro,
        kin_pos=kin_pos, kin_quat=kin_quat,
    )
