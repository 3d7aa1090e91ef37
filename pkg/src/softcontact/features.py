"""Feature windows for per-DoF contact clustering.

A data point for one endeffector DoF is the concatenated time history of
the six wrench channels followed by the one inertial channel matching that
DoF, giving ``7 * T`` values for a window of ``T`` strided samples.
Preprocessing z-scores each dimension against training-set statistics and
takes the absolute value, so slip signatures fold onto one side regardless
of direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: DoF order used everywhere: translations x, y, z then rotations about
#: x, y, z.
DOF_NAMES = ("x", "y", "z", "rx", "ry", "rz")

#: Inertial channel per DoF, indexing the (accel, gyro) column stack:
#: translational DoFs use the matching accelerometer axis, rotational DoFs
#: the matching gyro axis.
IMU_CHANNEL = {"x": 0, "y": 1, "z": 2, "rx": 3, "ry": 4, "rz": 5}

#: Channel blocks of a full window, in order.
WRENCH_BLOCKS = 6
FULL_BLOCKS = 7

STD_FLOOR = 1e-9


@dataclass(frozen=True)
class WrenchSample:
    """One contact wrench: force in newtons, torque in newton-meters."""

    force: np.ndarray
    torque: np.ndarray


@dataclass(frozen=True)
class ImuSample:
    """One inertial reading: linear acceleration (m/s^2), angular rate (rad/s)."""

    accel: np.ndarray
    gyro: np.ndarray


@dataclass
class SampleHistory:
    """Time-aligned wrench and IMU histories of one endeffector.

    All channel arrays are ``(n, 3)`` and share the same length;
    ``sample_period`` is the spacing in seconds (nominally 0.001).
    """

    forces: np.ndarray
    torques: np.ndarray
    accels: np.ndarray
    gyros: np.ndarray
    sample_period: float = 0.001

    def __post_init__(self):
        self.forces = np.ascontiguousarray(self.forces, dtype=np.float64)
        self.torques = np.ascontiguousarray(self.torques, dtype=np.float64)
        self.accels = np.ascontiguousarray(self.accels, dtype=np.float64)
        self.gyros = np.ascontiguousarray(self.gyros, dtype=np.float64)
        n = self.forces.shape[0]
        for name in ("forces", "torques", "accels", "gyros"):
            arr = getattr(self, name)
            if arr.shape != (n, 3):
                raise ValueError(
                    "history channels must be time-aligned (n, 3) arrays; "
                    f"{name} has shape {arr.shape}"
                )
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")

    def __len__(self) -> int:
        return self.forces.shape[0]

    @classmethod
    def from_samples(cls, wrench, imu, sample_period: float = 0.001):
        """Build from parallel lists of WrenchSample and ImuSample."""
        if len(wrench) != len(imu):
            raise ValueError("wrench and imu sample lists must be equal length")
        return cls(
            forces=np.array([s.force for s in wrench], dtype=np.float64),
            torques=np.array([s.torque for s in wrench], dtype=np.float64),
            accels=np.array([s.accel for s in imu], dtype=np.float64),
            gyros=np.array([s.gyro for s in imu], dtype=np.float64),
            sample_period=sample_period,
        )

    def channel_stack(self, dof: str | None) -> np.ndarray:
        """Channels of one DoF's window as an ``(n, blocks)`` column stack.

        ``dof=None`` selects the wrench-only layout (six columns, no
        inertial channel).
        """
        cols = [self.forces, self.torques]
        if dof is not None:
            if dof not in IMU_CHANNEL:
                raise ValueError(f"unknown dof {dof!r}; expected one of {DOF_NAMES}")
            chan = IMU_CHANNEL[dof]
            imu = np.hstack([self.accels, self.gyros])
            cols.append(imu[:, chan : chan + 1])
        return np.ascontiguousarray(np.hstack(cols))


@dataclass
class NormalizationStats:
    """Per-dimension z-score statistics frozen at training time."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be 1-D arrays of equal length")
        if not np.all(self.std > 0):
            raise ValueError("standard deviations must be strictly positive")

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]

    def truncate(self, dim: int) -> "NormalizationStats":
        return NormalizationStats(self.mean[:dim].copy(), self.std[:dim].copy())


def build_window(history: SampleHistory, dof: str, window: int, stride: int = 1) -> np.ndarray:
    """Raw feature vector from the most recent ``window`` strided samples.

    Blocks are concatenated in order Fx, Fy, Fz, tx, ty, tz, then the
    inertial channel matching ``dof``; each block runs oldest to newest.
    """
    mat = window_matrix(history, dof, window, stride, tail_only=True)
    return mat[0]


def window_matrix(
    history: SampleHistory,
    dof: str | None,
    window: int,
    stride: int = 1,
    tail_only: bool = False,
) -> np.ndarray:
    """All complete feature windows of a history, one row per end tick.

    Row ``i`` ends at tick ``window * stride - 1 + i``.  With
    ``tail_only`` set, only the single most recent window is returned
    (still 2-D).  ``dof=None`` builds the wrench-only 6-block layout.
    """
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be positive integers")
    n = len(history)
    need = window * stride
    if n < need:
        raise ValueError(
            f"insufficient history: need at least {need} samples, have {n}"
        )
    stack = history.channel_stack(dof)
    span = (window - 1) * stride + 1
    if tail_only:
        stack = stack[n - span :]
    # (n_windows, span, blocks) view, then strided down to window samples
    sliding = np.lib.stride_tricks.sliding_window_view(stack, span, axis=0)
    strided = sliding[:, :, ::stride]  # (n_windows, blocks, window)
    out = strided.reshape(strided.shape[0], -1)
    return np.ascontiguousarray(out)


def fit_stats(raw_windows) -> NormalizationStats:
    """Per-dimension mean and (population) standard deviation of a training set.

    Deviations are floored at ``STD_FLOOR`` so constant dimensions stay
    usable.
    """
    x = np.asarray(raw_windows, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("raw_windows must be a non-empty 2-D array")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 windows to fit statistics")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    np.maximum(std, STD_FLOOR, out=std)
    return NormalizationStats(mean=mean, std=std)


def preprocess(raw, stats: NormalizationStats) -> np.ndarray:
    """Rectified z-score: ``|(raw - mean) / std|`` per dimension.

    Accepts a single window or a stack of windows (last axis is the
    feature dimension).
    """
    x = np.asarray(raw, dtype=np.float64)
    if x.shape[-1] != stats.dimension:
        raise ValueError(
            f"dimension mismatch: window has {x.shape[-1]}, stats expect {stats.dimension}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("raw window contains non-finite values")
    return np.abs((x - stats.mean) / stats.std)
