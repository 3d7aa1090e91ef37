"""CSV serialization of truth, sensor and estimate logs.

Dialect: comma separated, one header row, decimals with 17 significant
digits, LF line endings.  Column orders are fixed and documented in each
writer; identical inputs always produce byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .quatmath import yaw_series
from .scenario import FZ_EPS, GroundTruthLog
from .sensors import SensorLog

FMT = "%.17g"

#: Truth log columns: time; base pose (pos 3, quat wxyz 4); base velocity
#: (linear 3, angular 3); then per foot (left, right): pose 7, velocity 6,
#: wrench 6 (force, torque), IMU 6 (world accel, world angular rate),
#: constraint-violation flags 3 (friction, cop, rotation).
TRUTH_COLUMNS = 70

#: Sensor log columns: time; base IMU 6 (accel, gyro); per foot: wrench 6,
#: foot IMU 6, kinematic relative pose 7 (position, quat wxyz).
SENSOR_COLUMNS = 45


def _write(path, header: list, matrix: np.ndarray) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in matrix:
            fh.write(",".join(FMT % x for x in row) + "\n")


def _foot_cols(prefix: str, names) -> list:
    return [f"{prefix}_{n}" for n in names]


_POSE = ("px", "py", "pz", "qw", "qx", "qy", "qz")
_VEL = ("vx", "vy", "vz", "wx", "wy", "wz")
_WRENCH = ("fx", "fy", "fz", "tx", "ty", "tz")
_IMU = ("ax", "ay", "az", "gx", "gy", "gz")
_FLAGS = ("viol_friction", "viol_cop", "viol_rotation")


def write_truth_csv(log: GroundTruthLog, path) -> None:
    n = len(log)
    cols = (
        ["time"]
        + _foot_cols("base", _POSE)
        + _foot_cols("base", _VEL)
    )
    blocks = [log.time[:, None], log.base_pos, log.base_quat, log.base_vel, log.base_angvel]
    for f, name in ((0, "left"), (1, "right")):
        cols += (
            _foot_cols(name, _POSE) + _foot_cols(name, _VEL)
            + _foot_cols(name, _WRENCH) + _foot_cols(name, _IMU)
            + _foot_cols(name, _FLAGS)
        )
        blocks += [
            log.foot_pos[:, f], log.foot_quat[:, f],
            log.foot_vel[:, f], log.foot_angvel[:, f],
            log.force[:, f], log.torque[:, f],
            log.foot_accel_w[:, f], log.foot_angvel[:, f],
            log.violated[:, f].astype(np.float64),
        ]
    matrix = np.hstack(blocks)
    assert matrix.shape == (n, TRUTH_COLUMNS)
    _write(path, cols, matrix)


def read_truth_csv(path) -> GroundTruthLog:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != TRUTH_COLUMNS:
        raise ValueError(
            f"truth log has {data.shape[1]} columns, expected {TRUTH_COLUMNS}"
        )
    time = data[:, 0]
    dt = float(time[1] - time[0]) if time.shape[0] > 1 else 0.001
    base_pos = data[:, 1:4]
    base_quat = data[:, 4:8]
    base_vel = data[:, 8:11]
    base_angvel = data[:, 11:14]
    foot_pos = np.empty((data.shape[0], 2, 3))
    foot_quat = np.empty((data.shape[0], 2, 4))
    foot_vel = np.empty((data.shape[0], 2, 3))
    foot_angvel = np.empty((data.shape[0], 2, 3))
    force = np.empty((data.shape[0], 2, 3))
    torque = np.empty((data.shape[0], 2, 3))
    foot_accel = np.empty((data.shape[0], 2, 3))
    violated = np.empty((data.shape[0], 2, 3), dtype=bool)
    for f in (0, 1):
        o = 14 + f * 28
        foot_pos[:, f] = data[:, o : o + 3]
        foot_quat[:, f] = data[:, o + 3 : o + 7]
        foot_vel[:, f] = data[:, o + 7 : o + 10]
        foot_angvel[:, f] = data[:, o + 10 : o + 13]
        force[:, f] = data[:, o + 13 : o + 16]
        torque[:, f] = data[:, o + 16 : o + 19]
        foot_accel[:, f] = data[:, o + 19 : o + 22]
        violated[:, f] = data[:, o + 25 : o + 28] > 0.5
    base_accel_w = np.empty_like(base_vel)
    base_accel_w[1:-1] = (base_vel[2:] - base_vel[:-2]) / (2 * dt)
    base_accel_w[0] = base_accel_w[1]
    base_accel_w[-1] = base_accel_w[-2]
    return GroundTruthLog(
        dt=dt, time=time, base_pos=base_pos, base_quat=base_quat,
        base_vel=base_vel, base_angvel=base_angvel, base_accel_w=base_accel_w,
        foot_pos=foot_pos, foot_quat=foot_quat, foot_vel=foot_vel,
        foot_angvel=foot_angvel, foot_accel_w=foot_accel,
        force=force, torque=torque, violated=violated,
        stance=force[:, :, 2] > FZ_EPS,
    )


def write_sensor_csv(log: SensorLog, path) -> None:
    cols = ["time"] + _foot_cols("base", _IMU)
    blocks = [log.time[:, None], log.base_accel, log.base_gyro]
    for f, name in ((0, "left"), (1, "right")):
        cols += (
            _foot_cols(name, _WRENCH) + _foot_cols(name, _IMU)
            + _foot_cols(name, ("kpx", "kpy", "kpz", "kqw", "kqx", "kqy", "kqz"))
        )
        blocks += [
            log.force[:, f], log.torque[:, f],
            log.foot_accel[:, f], log.foot_gyro[:, f],
            log.kin_pos[:, f], log.kin_quat[:, f],
        ]
    matrix = np.hstack(blocks)
    assert matrix.shape[1] == SENSOR_COLUMNS
    _write(path, cols, matrix)


def read_sensor_csv(path) -> SensorLog:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != SENSOR_COLUMNS:
        raise ValueError(
            f"sensor log has {data.shape[1]} columns, expected {SENSOR_COLUMNS}"
        )
    n = data.shape[0]
    time = data[:, 0]
    dt = float(time[1] - time[0]) if n > 1 else 0.001
    force = np.empty((n, 2, 3))
    torque = np.empty((n, 2, 3))
    foot_accel = np.empty((n, 2, 3))
    foot_gyro = np.empty((n, 2, 3))
    kin_pos = np.empty((n, 2, 3))
    kin_quat = np.empty((n, 2, 4))
    for f in (0, 1):
        o = 7 + f * 19
        force[:, f] = data[:, o : o + 3]
        torque[:, f] = data[:, o + 3 : o + 6]
        foot_accel[:, f] = data[:, o + 6 : o + 9]
        foot_gyro[:, f] = data[:, o + 9 : o + 12]
        kin_pos[:, f] = data[:, o + 12 : o + 15]
        kin_quat[:, f] = data[:, o + 15 : o + 19]
    return SensorLog(
        dt=dt, time=time,
        base_accel=data[:, 1:4], base_gyro=data[:, 4:7],
        force=force, torque=torque, foot_accel=foot_accel,
        foot_gyro=foot_gyro, kin_pos=kin_pos, kin_quat=kin_quat,
    )


def write_episodes_csv(episodes, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("foot,kind,dof,t_start,t_end\n")
        for e in episodes:
            fh.write(f"{e.foot},{e.kind},{e.dof},{FMT % e.t_start},{FMT % e.t_end}\n")


def write_estimate_csv(result, probabilities, path) -> None:
    """Estimate log: time, base pose 7, base velocity 6, then per foot the
    estimated pose 7, the six contact probabilities and the gate flag."""
    cols = ["time"] + _foot_cols("base", _POSE) + _foot_cols("base", _VEL[:3])
    n = result.pos.shape[0]
    blocks = [result.time[:, None], result.pos, result.quat, result.vel]
    for f, name in ((0, "left"), (1, "right")):
        cols += _foot_cols(name, _POSE)
        cols += _foot_cols(name, ("p_x", "p_y", "p_z", "p_rx", "p_ry", "p_rz"))
        cols += [f"{name}_gate"]
        blocks += [
            result.foot_pos[:, f], result.foot_quat[:, f],
            probabilities[:, f], result.gates[:, f].astype(np.float64)[:, None],
        ]
    matrix = np.hstack(blocks)
    _write(path, cols, matrix)


def write_experiment_csv(rows, path) -> None:
    """Aggregated experiment results: per-trial values plus mean/std rows."""
    header = ["experiment", "condition", "trial", "rmse_x", "rmse_y", "rmse_z",
              "rmse_yaw", "rmse_pos3d"]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    [
                        str(row["experiment"]),
                        str(row["condition"]),
                        str(row["trial"]),
                        FMT % row["x"],
                        FMT % row["y"],
                        FMT % row["z"],
                        FMT % row["yaw"],
                        FMT % row["pos3d"],
                    ]
                )
                + "\n"
            )
