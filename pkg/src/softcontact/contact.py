"""Per-DoF contact probability models.

Six independent two-cluster models (one per endeffector DoF) are fitted
offline from logged proprioceptive histories.  At runtime the soft
membership of the current feature window in the contact cluster is the
contact probability for that DoF.  Inference can either use the full
window or drop the trailing inertial block, evaluating only against the
leading wrench sub-vector of the stored means ("wrench-only" mode).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import accel, fcm, features
from .accel import maybe_jit
from .features import (
    DOF_NAMES,
    WRENCH_BLOCKS,
    FULL_BLOCKS,
    NormalizationStats,
    SampleHistory,
)

MODEL_FORMAT = "softcontact-model"
MODEL_VERSION = 1

#: Fill value emitted for ticks that predate the first complete window.
WARMUP_PROBABILITY = 0.5


@dataclass
class DofContactModel:
    """Fitted two-cluster model for one DoF."""

    means: np.ndarray  # (2, 7*T) cluster means in preprocessed feature space
    stats: NormalizationStats
    contact_index: int
    final_cost: float = 0.0
    iterations_used: int = 0

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        if self.means.shape[0] != 2:
            raise ValueError("per-DoF models have exactly two clusters")
        if self.means.shape[1] != self.stats.dimension:
            raise ValueError("means and stats disagree on dimension")
        if self.contact_index not in (0, 1):
            raise ValueError("contact_index must be 0 or 1")


@dataclass
class ContactModel:
    """Trained contact estimator: one DofContactModel per DoF.

    ``window`` is the number of strided samples per channel block,
    ``stride`` the sample spacing, ``fuzziness`` the membership exponent
    used at inference.
    """

    dofs: dict
    window: int
    stride: int
    fuzziness: float

    def __post_init__(self):
        if set(self.dofs) != set(DOF_NAMES):
            raise ValueError(f"model must define exactly the DoFs {DOF_NAMES}")
        dim = FULL_BLOCKS * self.window
        for name in DOF_NAMES:
            if self.dofs[name].means.shape[1] != dim:
                raise ValueError(f"dof {name}: mean dimension != {dim}")
        if not self.fuzziness > 1.0:
            raise ValueError("fuzziness must be strictly greater than 1")

    @property
    def dimension(self) -> int:
        return FULL_BLOCKS * self.window


def label_contact_cluster(cluster_fz_means) -> int:
    """Index of the contact cluster given each cluster's mean raw normal force.

    The loading force is the one physically unambiguous discriminator
    between the contact and free clusters; ties break toward index 0.
    """
    fz = np.asarray(cluster_fz_means, dtype=np.float64)
    if fz.shape != (2,):
        raise ValueError("expected one mean normal force per cluster")
    return 1 if fz[1] > fz[0] else 0


def weighted_cluster_fz(raw_windows, memberships, window: int, fuzziness: float):
    """Membership-weighted mean of the raw Fz block for each cluster."""
    fz_block = np.asarray(raw_windows)[:, 2 * window : 3 * window].mean(axis=1)
    wm = np.asarray(memberships) ** fuzziness
    return (wm * fz_block[:, None]).sum(axis=0) / wm.sum(axis=0)


def train(
    logs,
    config: fcm.FcmConfig,
    window: int = 20,
    stride: int = 1,
) -> ContactModel:
    """Fit the six per-DoF models from one or more endeffector histories.

    Normalization statistics are computed per DoF problem over the pooled
    training windows and frozen into the model.  Per-DoF fits use seeds
    derived from ``config.rng_seed`` so training is deterministic.
    """
    if config.num_clusters != 2:
        raise ValueError("contact models use exactly 2 clusters")
    if isinstance(logs, SampleHistory):
        logs = [logs]
    dofs = {}
    for idx, dof in enumerate(DOF_NAMES):
        raw = np.vstack(
            [features.window_matrix(log, dof, window, stride) for log in logs]
        )
        if raw.shape[0] < 100:
            raise ValueError(
                f"insufficient training data: {raw.shape[0]} windows for dof {dof}, "
                "need at least 100"
            )
        stats = features.fit_stats(raw)
        feats = features.preprocess(raw, stats)
        cfg = dataclasses.replace(config, rng_seed=config.rng_seed + idx)
        model = fcm.fit(feats, cfg)
        memberships = _memberships_batch(feats, model.means, cfg.fuzziness)
        fz = weighted_cluster_fz(raw, memberships, window, cfg.fuzziness)
        dofs[dof] = DofContactModel(
            means=model.means,
            stats=stats,
            contact_index=label_contact_cluster(fz),
            final_cost=model.final_cost,
            iterations_used=model.iterations_used,
        )
    return ContactModel(dofs=dofs, window=window, stride=stride, fuzziness=config.fuzziness)


def estimate_probability(model: ContactModel, history: SampleHistory) -> np.ndarray:
    """Contact probability vector (x, y, z, rx, ry, rz) at the newest tick."""
    return _estimate(model, history, wrench_only=False)


def estimate_probability_wrench_only(model: ContactModel, history: SampleHistory) -> np.ndarray:
    """Contact probability using only the leading wrench blocks.

    Memberships are evaluated on the first ``6 * T`` components of both
    the window and the stored means, with the statistics truncated the
    same way; the inertial channels are never read.
    """
    return _estimate(model, history, wrench_only=True)


def _estimate(model, history, wrench_only):
    dim = (WRENCH_BLOCKS if wrench_only else FULL_BLOCKS) * model.window
    p = np.empty(len(DOF_NAMES))
    for i, dof in enumerate(DOF_NAMES):
        raw = features.window_matrix(
            history, None if wrench_only else dof, model.window, model.stride,
            tail_only=True,
        )
        dm = model.dofs[dof]
        stats = dm.stats.truncate(dim) if wrench_only else dm.stats
        feats = features.preprocess(raw, stats)
        w = _memberships_batch(feats, dm.means[:, :dim], model.fuzziness)
        p[i] = w[0, dm.contact_index]
    return p


def probability_series(
    model: ContactModel,
    history: SampleHistory,
    wrench_only: bool = False,
) -> np.ndarray:
    """Per-tick contact probabilities over a whole history, shape (n, 6).

    Output row ``t`` uses only samples at ticks <= ``t``.  Ticks before the
    first complete window are filled with ``WARMUP_PROBABILITY``.
    """
    n = len(history)
    window, stride = model.window, model.stride
    need = window * stride
    if n < need:
        raise ValueError(f"insufficient history: need {need} samples, have {n}")
    dim = (WRENCH_BLOCKS if wrench_only else FULL_BLOCKS) * window
    out = np.full((n, len(DOF_NAMES)), WARMUP_PROBABILITY)
    expo = 1.0 / (model.fuzziness - 1.0)
    for i, dof in enumerate(DOF_NAMES):
        dm = model.dofs[dof]
        stats = dm.stats.truncate(dim) if wrench_only else dm.stats
        stack = history.channel_stack(None if wrench_only else dof)
        if accel.NUMBA_ENABLED:
            w_contact = np.empty(n - need + 1)
            _series_kernel(
                stack,
                stats.mean,
                stats.std,
                np.ascontiguousarray(dm.means[0, :dim]),
                np.ascontiguousarray(dm.means[1, :dim]),
                expo,
                window,
                stride,
                w_contact,
            )
            if dm.contact_index == 0:
                out[need - 1 :, i] = w_contact
            else:
                out[need - 1 :, i] = 1.0 - w_contact
        else:
            raw = features.window_matrix(history, None if wrench_only else dof,
                                         window, stride)
            feats = features.preprocess(raw, stats)
            w = _memberships_batch(feats, dm.means[:, :dim], model.fuzziness)
            out[need - 1 :, i] = w[:, dm.contact_index]
    return out


def in_contact(p, threshold: float = 0.5) -> bool:
    """Endeffector-level contact decision: every DoF strictly above threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    p = np.asarray(p, dtype=np.float64)
    return bool(np.all(p > threshold))


class StreamingContactEstimator:
    """Online per-endeffector wrapper around a trained model.

    Holds a ring buffer of the most recent ``window * stride`` samples and
    emits one probability vector per pushed tick.  During warmup (buffer
    not yet full) the fill value is returned.
    """

    def __init__(self, model: ContactModel, wrench_only: bool = False):
        self.model = model
        self.wrench_only = wrench_only
        self._size = model.window * model.stride
        self._buf = np.zeros((self._size, 12))
        self._count = 0

    def push(self, force, torque, accel_=None, gyro=None) -> np.ndarray:
        row = np.zeros(12)
        row[0:3] = force
        row[3:6] = torque
        if accel_ is not None:
            row[6:9] = accel_
        if gyro is not None:
            row[9:12] = gyro
        self._buf = np.roll(self._buf, -1, axis=0)
        self._buf[-1] = row
        self._count += 1
        if self._count < self._size:
            return np.full(len(DOF_NAMES), WARMUP_PROBABILITY)
        hist = SampleHistory(
            forces=self._buf[:, 0:3],
            torques=self._buf[:, 3:6],
            accels=self._buf[:, 6:9],
            gyros=self._buf[:, 9:12],
        )
        if self.wrench_only:
            return estimate_probability_wrench_only(self.model, hist)
        return estimate_probability(self.model, hist)


# ---------------------------------------------------------------------------
# membership evaluation


def _memberships_batch(feats: np.ndarray, means: np.ndarray, fuzziness: float) -> np.ndarray:
    """Tolerant batch membership rows (ties split evenly, no exceptions)."""
    d2 = fcm._dist_sq(np.ascontiguousarray(feats), np.ascontiguousarray(means))
    return fcm._memberships_from_dist(d2, fuzziness)


@maybe_jit
def _series_kernel(stack, mean, std, m0, m1, expo, window, stride, out):
    """Membership of cluster 0 for every complete window of ``stack``.

    Fuses window assembly, preprocessing and the two-cluster membership
    formula; nothing is materialized per window.
    """
    n, blocks = stack.shape
    need = window * stride
    z2 = 1e-24
    for t in range(need - 1, n):
        d0 = 0.0
        d1 = 0.0
        idx = 0
        for b in range(blocks):
            for k in range(window):
                raw = stack[t - (window - 1 - k) * stride, b]
                v = abs((raw - mean[idx]) / std[idx])
                e0 = v - m0[idx]
                e1 = v - m1[idx]
                d0 += e0 * e0
                d1 += e1 * e1
                idx += 1
        if d0 < z2 and d1 < z2:
            w0 = 0.5
        elif d0 < z2:
            w0 = 1.0
        elif d1 < z2:
            w0 = 0.0
        else:
            w0 = 1.0 / (1.0 + (d0 / d1) ** expo)
        out[t - need + 1] = w0


# ---------------------------------------------------------------------------
# model file format


def save_model(model: ContactModel, path) -> None:
    """Write a model as versioned plain text.

    Layout: a header (format tag/version, window, stride, fuzziness, DoF
    order), then per DoF a block with the contact label, the two stats
    vectors and the two mean vectors.  Floats are written with 17
    significant digits so a load reproduces every field bitwise.
    """
    lines = [
        f"{MODEL_FORMAT} v{MODEL_VERSION}",
        f"window {model.window}",
        f"stride {model.stride}",
        "fuzziness %.17g" % model.fuzziness,
        "dofs " + " ".join(DOF_NAMES),
    ]
    for dof in DOF_NAMES:
        dm = model.dofs[dof]
        lines.append(f"dof {dof}")
        lines.append(f"contact_cluster {dm.contact_index}")
        lines.append("final_cost %.17g" % dm.final_cost)
        lines.append(f"iterations {dm.iterations_used}")
        lines.append("stats_mean " + _fmt_vec(dm.stats.mean))
        lines.append("stats_std " + _fmt_vec(dm.stats.std))
        lines.append("mean0 " + _fmt_vec(dm.means[0]))
        lines.append("mean1 " + _fmt_vec(dm.means[1]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> ContactModel:
    """Read a model written by :func:`save_model`.

    Raises :class:`ModelFormatError` on version mismatch, truncation or
    dimension inconsistencies.
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    pos = 0

    def take(prefix):
        nonlocal pos
        if pos >= len(lines):
            raise ModelFormatError(f"truncated model file: expected {prefix!r}")
        line = lines[pos]
        pos += 1
        if not line.startswith(prefix + " "):
            raise ModelFormatError(f"expected {prefix!r}, found {line[:40]!r}")
        return line[len(prefix) + 1 :]

    header = lines[0] if lines else ""
    pos = 1
    if header != f"{MODEL_FORMAT} v{MODEL_VERSION}":
        raise ModelFormatError(f"unsupported model header {header!r}")
    window = int(take("window"))
    stride = int(take("stride"))
    fuzziness = float(take("fuzziness"))
    dof_order = tuple(take("dofs").split())
    if dof_order != DOF_NAMES:
        raise ModelFormatError(f"unexpected dof order {dof_order}")
    dim = FULL_BLOCKS * window
    dofs = {}
    for dof in DOF_NAMES:
        name = take("dof")
        if name != dof:
            raise ModelFormatError(f"expected dof {dof}, found {name}")
        contact_index = int(take("contact_cluster"))
        final_cost = float(take("final_cost"))
        iterations = int(take("iterations"))
        stats_mean = _parse_vec(take("stats_mean"), dim)
        stats_std = _parse_vec(take("stats_std"), dim)
        mean0 = _parse_vec(take("mean0"), dim)
        mean1 = _parse_vec(take("mean1"), dim)
        dofs[dof] = DofContactModel(
            means=np.vstack([mean0, mean1]),
            stats=NormalizationStats(stats_mean, stats_std),
            contact_index=contact_index,
            final_cost=final_cost,
            iterations_used=iterations,
        )
    return ContactModel(dofs=dofs, window=window, stride=stride, fuzziness=fuzziness)


class ModelFormatError(ValueError):
    """Model file does not match the expected schema."""


def _fmt_vec(v) -> str:
    return " ".join("%.17g" % x for x in np.asarray(v, dtype=np.float64))


def _parse_vec(text: str, dim: int) -> np.ndarray:
    vals = np.array([float(x) for x in text.split()], dtype=np.float64)
    if vals.shape[0] != dim:
        raise ModelFormatError(f"vector length {vals.shape[0]} != expected {dim}")
    return vals
