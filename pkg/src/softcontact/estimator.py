"""Error-state Kalman base state estimator with per-foot pose measurements.

The nominal state holds base position, velocity and orientation, IMU
biases, and one pose (position + quaternion) per foot; the 27-dimensional
error state linearizes small perturbations, with orientation errors as
3-vector right perturbations.  Prediction integrates the bias-corrected
base IMU; updates fuse the relative foot pose measured through leg
kinematics, gated by the contact decision and weighted by the
probability-modulated covariance.

The per-run loop is a numba kernel (or the same source interpreted, see
:mod:`softcontact.accel`); single-step public functions reuse the same
step kernels so both paths stay in lockstep.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .accel import maybe_jit
from .quatmath import (
    quat_conj,
    quat_mult,
    quat_normalize,
    quat_to_rot,
    rotvec_to_quat,
    skew,
    wrap_angle,
    yaw_series,
)
from .sensors import GRAVITY_W, SensorLog

N_ERR = 27  # 15 base error states + 2 feet x (3 pos + 3 rot)


@dataclass(frozen=True)
class MeasurementNoise:
    """Nominal measurement noise and probability-term scaling.

    ``r_nominal`` applies to the position rows (meters); the orientation
    rows use ``r_orientation`` when given, else the same value.  ``alpha``
    scales the probability-dependent covariance term.
    """

    r_nominal: float = 0.005
    alpha: float = 1.0
    r_orientation: float | None = 0.02

    def __post_init__(self):
        if not self.r_nominal > 0:
            raise ValueError("r_nominal must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.r_orientation is not None and not self.r_orientation > 0:
            raise ValueError("r_orientation must be positive")

    @property
    def r_vector(self) -> np.ndarray:
        r_rot = self.r_nominal if self.r_orientation is None else self.r_orientation
        return np.array([self.r_nominal] * 3 + [r_rot] * 3)


@dataclass(frozen=True)
class EstimatorConfig:
    """Process noise levels; IMU terms default to the simulated sensor grade."""

    accel_noise: float = 0.02467  # m/s^2 per sample
    accel_bias_walk: float = 0.00316  # m/s^3
    gyro_noise: float = 0.01653  # rad/s
    gyro_bias_walk: float = 0.01954  # rad/s^2
    foot_noise_contact: float = 1e-4  # m/sqrt(s): feet latched in contact
    foot_noise_hold: float = 0.03  # m/sqrt(s): loaded but measurement gated out
    foot_noise_hold_rot: float = 0.02  # rad/sqrt(s)
    foot_noise_swing: float = 0.3  # m/sqrt(s): foot actually airborne
    load_on: float = 30.0  # N of measured normal force that counts as loaded
    gravity: float = 9.81

    def process_diag(self, dt: float, gate_left: bool, gate_right: bool) -> np.ndarray:
        q = np.zeros(N_ERR)
        q[3:6] = (self.accel_noise * dt) ** 2
        q[6:9] = (self.gyro_noise * dt) ** 2
        q[9:12] = (self.accel_bias_walk * dt) ** 2
        q[12:15] = (self.gyro_bias_walk * dt) ** 2
        for f, gate in ((0, gate_left), (1, gate_right)):
            sigma = self.foot_noise_contact if gate else self.foot_noise_swing
            q[15 + 6 * f : 21 + 6 * f] = sigma * sigma * dt
        return q


@dataclass
class BaseState:
    """Nominal filter state plus the error-state covariance."""

    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quat: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    foot_pos: np.ndarray = field(default_factory=lambda: np.zeros((2, 3)))
    foot_quat: np.ndarray = field(
        default_factory=lambda: np.tile(np.array([1.0, 0, 0, 0]), (2, 1))
    )
    cov: np.ndarray = field(default_factory=lambda: np.eye(N_ERR) * 1e-10)

    def copy(self) -> "BaseState":
        return BaseState(
            pos=self.pos.copy(), vel=self.vel.copy(), quat=self.quat.copy(),
            accel_bias=self.accel_bias.copy(), gyro_bias=self.gyro_bias.copy(),
            foot_pos=self.foot_pos.copy(), foot_quat=self.foot_quat.copy(),
            cov=self.cov.copy(),
        )

    def validate(self, tol: float = 1e-9) -> None:
        """Check the quaternion-norm and covariance invariants."""
        if abs(np.linalg.norm(self.quat) - 1.0) > tol:
            raise ValueError("base quaternion is not unit length")
        for f in (0, 1):
            if abs(np.linalg.norm(self.foot_quat[f]) - 1.0) > tol:
                raise ValueError(f"foot {f} quaternion is not unit length")
        if np.abs(self.cov - self.cov.T).max() > 1e-9:
            raise ValueError("covariance is not symmetric")
        if np.linalg.eigvalsh(self.cov).min() < -1e-10:
            raise ValueError("covariance is not positive semi-definite")


def fixed_threshold_contact(fz: float, threshold: float) -> bool:
    """Baseline contact decision: measured normal force strictly above threshold."""
    return bool(fz > threshold)


def modulate_covariance(p, noise: MeasurementNoise) -> np.ndarray:
    """Measurement covariance ``r^2 I + alpha (I - diag(p))`` (endeffector frame).

    With every probability at 1 the matrix is exactly ``r^2 I``; lowering
    any entry of ``p`` only ever inflates the matching diagonal entry.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (6,):
        raise ValueError("probability vector must have 6 entries")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    r = noise.r_vector
    return np.diag(r * r + noise.alpha * (1.0 - p))


def transform_covariance(sigma: np.ndarray, rot: np.ndarray) -> np.ndarray:
    """Rotate a 6x6 endeffector-frame covariance into the base frame.

    ``rot`` is the 3x3 endeffector-to-base rotation, applied blockwise to
    the position and orientation halves; the result is symmetrized.
    """
    rot = np.asarray(rot, dtype=np.float64)
    if rot.shape != (3, 3) or np.abs(rot @ rot.T - np.eye(3)).max() > 1e-9:
        raise ValueError("rot must be an orthonormal 3x3 rotation")
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (6, 6):
        raise ValueError("sigma must be 6x6")
    r6 = np.zeros((6, 6))
    r6[:3, :3] = rot
    r6[3:, 3:] = rot
    out = r6 @ sigma @ r6.T
    return 0.5 * (out + out.T)


def predict(state: BaseState, accel, gyro, dt: float,
            config: EstimatorConfig = EstimatorConfig(),
            feet_latched: bool = True) -> BaseState:
    """Strapdown prediction over one IMU sample; returns a new state."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    accel = np.asarray(accel, dtype=np.float64)
    gyro = np.asarray(gyro, dtype=np.float64)
    if not (np.all(np.isfinite(accel)) and np.all(np.isfinite(gyro))):
        raise ValueError("IMU sample contains non-finite values")
    out = state.copy()
    qdiag = config.process_diag(dt, feet_latched, feet_latched)
    g = np.array([0.0, 0.0, config.gravity])
    _predict_step(out.pos, out.vel, out.quat, out.accel_bias, out.gyro_bias,
                  out.cov, accel, gyro, dt, qdiag, g)
    return out


def update_foot(state: BaseState, foot: int, meas_pos, meas_quat,
                sigma_base: np.ndarray, gate: bool) -> BaseState:
    """Fuse one relative foot pose measurement; a closed gate is a no-op.

    ``sigma_base`` is the 6x6 measurement covariance already expressed in
    the base frame.
    """
    if not gate:
        return state
    out = state.copy()
    _update_foot_step(
        out.pos, out.vel, out.quat, out.accel_bias, out.gyro_bias,
        out.foot_pos, out.foot_quat, out.cov, foot,
        np.asarray(meas_pos, dtype=np.float64),
        np.asarray(meas_quat, dtype=np.float64),
        np.ascontiguousarray(sigma_base, dtype=np.float64),
    )
    return out


def rmse(estimated: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-dimension root-mean-squared error of aligned series."""
    est = np.asarray(estimated, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape:
        raise ValueError("estimated and truth series must have equal shapes")
    err = est - tru
    if err.ndim == 1:
        err = err[:, None]
    return np.sqrt(np.mean(err * err, axis=0))


# ---------------------------------------------------------------------------
# step kernels


@maybe_jit
def _predict_step(r, v, q, ba, bw, P, accel, gyro, dt, qdiag, g):
    a_b = accel - ba
    w_b = gyro - bw
    R = quat_to_rot(q)
    a_w = R @ a_b - g
    for i in range(3):
        r[i] += v[i] * dt + 0.5 * a_w[i] * dt * dt
        v[i] += a_w[i] * dt
    dq = rotvec_to_quat(w_b * dt)
    q_new = quat_normalize(quat_mult(q, dq))
    for i in range(4):
        q[i] = q_new[i]
    F = np.eye(N_ERR)
    for i in range(3):
        F[i, 3 + i] = dt
    block = -R @ skew(a_b) * dt
    F[3:6, 6:9] = block
    F[3:6, 9:12] = -R * dt
    F[6:9, 6:9] = np.eye(3) - skew(w_b * dt)
    for i in range(3):
        F[6 + i, 12 + i] = -dt
    P_new = F @ P @ F.T
    for i in range(N_ERR):
        P_new[i, i] += qdiag[i]
    for i in range(N_ERR):
        for j in range(N_ERR):
            P[i, j] = 0.5 * (P_new[i, j] + P_new[j, i])


@maybe_jit
def _update_foot_step(r, v, q, ba, bw, fp, fq, P, foot, meas_pos, meas_quat, sigma):
    R = quat_to_rot(q)
    Rt = R.T
    rel = np.empty(3)
    for i in range(3):
        rel[i] = fp[foot, i] - r[i]
    y = Rt @ rel
    fq_f = fq[foot].copy()
    yq = quat_mult(q, quat_conj(fq_f))
    innov = np.empty(6)
    for i in range(3):
        innov[i] = meas_pos[i] - y[i]
    dqq = quat_mult(quat_conj(yq), meas_quat)
    if dqq[0] < 0.0:
        dqq = -dqq
    for i in range(3):
        innov[3 + i] = 2.0 * dqq[1 + i]
    H = np.zeros((6, N_ERR))
    base = 15 + 6 * foot
    H[0:3, 0:3] = -Rt
    H[0:3, 6:9] = skew(y)
    H[0:3, base : base + 3] = Rt
    Rz = quat_to_rot(fq_f)
    H[3:6, 6:9] = Rz
    H[3:6, base + 3 : base + 6] = -Rz
    PHt = P @ H.T
    S = H @ PHt + sigma
    K = np.linalg.solve(S, np.ascontiguousarray(PHt.T)).T
    dx = K @ innov
    for i in range(3):
        r[i] += dx[i]
        v[i] += dx[3 + i]
        ba[i] += dx[9 + i]
        bw[i] += dx[12 + i]
    q_new = quat_normalize(quat_mult(q, rotvec_to_quat(dx[6:9])))
    for i in range(4):
        q[i] = q_new[i]
    for f in range(2):
        off = 15 + 6 * f
        for i in range(3):
            fp[f, i] += dx[off + i]
        z_new = quat_normalize(quat_mult(fq[f].copy(), rotvec_to_quat(dx[off + 3 : off + 6])))
        for i in range(4):
            fq[f, i] = z_new[i]
    IKH = np.eye(N_ERR) - K @ H
    P_new = IKH @ P @ IKH.T + K @ sigma @ K.T
    for i in range(N_ERR):
        for j in range(N_ERR):
            P[i, j] = 0.5 * (P_new[i, j] + P_new[j, i])


@maybe_jit
def _filter_loop(
    accel, gyro, kin_pos, kin_quat, gate, loaded, meas_var,
    r, v, q, ba, bw, fp, fq, P,
    dt, g, qdiag_base, q_contact, q_hold_pos, q_hold_rot, q_swing,
    est_pos, est_vel, est_quat, est_fp, est_fq, est_bw,
    cov_snaps, snap_every,
):
    n = accel.shape[0]
    qdiag = np.zeros(N_ERR)
    for i in range(15):
        qdiag[i] = qdiag_base[i]
    snap = 0
    for t in range(n):
        # the IMU sample at t-1 carries the state from tick t-1 to t; the
        # measurements at t then correct the state at tick t
        if t > 0:
            for f in range(2):
                if loaded[t, f] == 0:
                    qp = q_swing
                    qr = q_swing
                elif gate[t, f] == 1:
                    qp = q_contact
                    qr = q_contact
                else:
                    qp = q_hold_pos
                    qr = q_hold_rot
                for i in range(3):
                    qdiag[15 + 6 * f + i] = qp * dt
                    qdiag[18 + 6 * f + i] = qr * dt
            _predict_step(r, v, q, ba, bw, P, accel[t - 1], gyro[t - 1], dt, qdiag, g)
        for f in range(2):
            if gate[t, f] == 1:
                # endeffector-frame diagonal covariance, rotated into base
                Reb = quat_to_rot(q).T @ quat_to_rot(fq[f].copy())
                sigma = np.zeros((6, 6))
                sigma[0:3, 0:3] = Reb @ np.diag(meas_var[t, f, 0:3]) @ Reb.T
                sigma[3:6, 3:6] = Reb @ np.diag(meas_var[t, f, 3:6]) @ Reb.T
                _update_foot_step(r, v, q, ba, bw, fp, fq, P, f,
                                  kin_pos[t, f], kin_quat[t, f], sigma)
        for i in range(3):
            est_pos[t, i] = r[i]
            est_vel[t, i] = v[i]
            est_bw[t, i] = bw[i]
        for i in range(4):
            est_quat[t, i] = q[i]
        for f in range(2):
            for i in range(3):
                est_fp[t, f, i] = fp[f, i]
            for i in range(4):
                est_fq[t, f, i] = fq[f, i]
        if snap_every > 0 and t % snap_every == 0 and snap < cov_snaps.shape[0]:
            for i in range(N_ERR):
                for j in range(N_ERR):
                    cov_snaps[snap, i, j] = P[i, j]
            snap += 1


@dataclass
class FilterResult:
    """Per-tick state estimates of one filter run."""

    time: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    quat: np.ndarray
    foot_pos: np.ndarray
    foot_quat: np.ndarray
    gates: np.ndarray
    gyro_bias: np.ndarray
    final_cov: np.ndarray
    cov_snapshots: np.ndarray

    @property
    def yaw(self) -> np.ndarray:
        return yaw_series(self.quat)


def run_filter(
    log: SensorLog,
    gates: np.ndarray,
    meas_var: np.ndarray,
    init: BaseState,
    config: EstimatorConfig = EstimatorConfig(),
    snap_every: int = 1000,
) -> FilterResult:
    """Run the estimator over a full sensor log.

    ``gates`` is (n, 2) boolean; ``meas_var`` is (n, 2, 6) with the
    endeffector-frame diagonal measurement variances per tick and foot
    (position rows then orientation rows).
    """
    n = len(log)
    if gates.shape != (n, 2) or meas_var.shape != (n, 2, 6):
        raise ValueError("gates/meas_var do not match the log length")
    loaded = log.force[:, :, 2] > config.load_on
    state = init.copy()
    est_pos = np.empty((n, 3))
    est_vel = np.empty((n, 3))
    est_quat = np.empty((n, 4))
    est_fp = np.empty((n, 2, 3))
    est_fq = np.empty((n, 2, 4))
    est_bw = np.empty((n, 3))
    n_snaps = (n + snap_every - 1) // snap_every if snap_every > 0 else 0
    cov_snaps = np.zeros((max(n_snaps, 1), N_ERR, N_ERR))
    qdiag_base = config.process_diag(log.dt, True, True)[:15]
    _filter_loop(
        np.ascontiguousarray(log.base_accel),
        np.ascontiguousarray(log.base_gyro),
        np.ascontiguousarray(log.kin_pos),
        np.ascontiguousarray(log.kin_quat),
        np.ascontiguousarray(gates.astype(np.uint8)),
        np.ascontiguousarray(loaded.astype(np.uint8)),
        np.ascontiguousarray(meas_var),
        state.pos, state.vel, state.quat, state.accel_bias, state.gyro_bias,
        state.foot_pos, state.foot_quat, state.cov,
        log.dt, np.array([0.0, 0.0, config.gravity]),
        np.ascontiguousarray(qdiag_base),
        config.foot_noise_contact**2, config.foot_noise_hold**2,
        config.foot_noise_hold_rot**2, config.foot_noise_swing**2,
        est_pos, est_vel, est_quat, est_fp, est_fq, est_bw,
        cov_snaps, snap_every,
    )
    return FilterResult(
        time=log.time.copy(), pos=est_pos, vel=est_vel, quat=est_quat,
        foot_pos=est_fp, foot_quat=est_fq, gates=gates.copy(),
        gyro_bias=est_bw, final_cov=state.cov, cov_snapshots=cov_snaps,
    )


def evaluate_errors(result: FilterResult, truth) -> dict:
    """RMSE of the unobservable states: base x, y, z and yaw."""
    err_pos = rmse(result.pos, truth.base_pos)
    yaw_err = wrap_angle(yaw_series(result.quat) - yaw_series(truth.base_quat))
    pos3d = float(np.sqrt(np.mean(np.sum((result.pos - truth.base_pos) ** 2, axis=1))))
    return {
        "x": float(err_pos[0]),
        "y": float(err_pos[1]),
        "z": float(err_pos[2]),
        "yaw": float(np.sqrt(np.mean(yaw_err**2))),
        "pos3d": pos3d,
    }
