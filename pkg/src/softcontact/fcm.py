"""Fuzzy c-means clustering with soft membership evaluation.

The cost being minimized is ``sum_i sum_j w_ij^m ||x_i - c_j||^2`` with
``m > 1``.  Fitting alternates the weighted-mean update and the membership
update from randomly initialized, row-normalized memberships until the
largest membership change falls below the configured tolerance.  Membership
weights are nonnegative and sum to one per point, which is what lets the
contact layer read them as probabilities.

Two execution paths produce the fit: a vectorized numpy implementation and
a numba-compiled loop version, selected through :mod:`softcontact.accel`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import accel
from .accel import maybe_jit

# Distances below this are treated as the zero-distance limit of the
# membership formula; weight masses below it trigger the empty-cluster
# rescue during fitting.
ZERO_DISTANCE = 1e-12
EMPTY_MASS = 1e-12


class AmbiguousMembershipError(ValueError):
    """A point coincides with two or more cluster means at once."""


class DegenerateClusterError(ValueError):
    """A cluster's total weight mass vanished."""


@dataclass(frozen=True)
class FcmConfig:
    """Clustering hyper-parameters.

    Parameters
    ----------
    num_clusters : int
        Number of clusters to fit.
    fuzziness : float
        Overlap exponent ``m``; must be strictly greater than 1.
    tolerance : float
        Convergence threshold on the maximum absolute membership change
        between iterations.
    max_iterations : int
        Hard cap on the number of update iterations.
    rng_seed : int
        Seed for the membership initialization; fits are deterministic
        given the same data and seed.
    """

    num_clusters: int = 2
    fuzziness: float = 1.2
    tolerance: float = 1e-5
    max_iterations: int = 300
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_clusters < 1:
            raise ValueError("num_clusters must be a positive integer")
        if not self.fuzziness > 1.0:
            raise ValueError("fuzziness must be strictly greater than 1")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be strictly positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class FcmModel:
    """Result of a fit.

    Attributes
    ----------
    means : ndarray, shape (num_clusters, dimension)
        Converged cluster means.
    dimension : int
        Feature dimension ``D``.
    final_cost : float
        Cost at the last iteration.
    iterations_used : int
        Number of iterations actually run.
    cost_history : ndarray
        Cost after each (mean update, membership update) pair.
    rescue_iterations : tuple of int
        1-based iterations at which an empty cluster was reseeded; the
        cost is allowed to jump across these.
    """

    means: np.ndarray
    dimension: int
    final_cost: float
    iterations_used: int
    cost_history: np.ndarray
    rescue_iterations: tuple = field(default_factory=tuple)


def _as_points(points) -> np.ndarray:
    x = np.ascontiguousarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("points must be a 2-D array of shape (n, dimension)")
    if not np.all(np.isfinite(x)):
        raise ValueError("points contain non-finite values")
    return x


def membership(point, means, fuzziness: float) -> np.ndarray:
    """Soft membership weights of one point against a set of means.

    Weights are nonnegative and sum to 1.  If the point coincides with
    exactly one mean (distance below ``ZERO_DISTANCE``) that cluster gets
    weight 1; coinciding with several means is ambiguous and raises
    :class:`AmbiguousMembershipError`.
    """
    p = np.asarray(point, dtype=np.float64)
    c = np.asarray(means, dtype=np.float64)
    if c.ndim != 2 or p.ndim != 1 or c.shape[1] != p.shape[0]:
        raise ValueError("point and means must share one dimension")
    if not fuzziness > 1.0:
        raise ValueError("fuzziness must be strictly greater than 1")
    d2 = np.einsum("ij,ij->i", c - p, c - p)
    zero = d2 < ZERO_DISTANCE * ZERO_DISTANCE
    n_zero = int(zero.sum())
    if n_zero >= 2:
        raise AmbiguousMembershipError(
            "point coincides with %d means; membership limit is ambiguous" % n_zero
        )
    if n_zero == 1:
        return zero.astype(np.float64)
    expo = 1.0 / (fuzziness - 1.0)
    ratio = d2 / d2.min()
    inv = ratio**-expo
    return inv / inv.sum()


def update_means(points, weights, fuzziness: float) -> np.ndarray:
    """Weighted-mean update: each mean is the ``w^m``-weighted point average."""
    x = _as_points(points)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != x.shape[0]:
        raise ValueError("weights must have one row per point")
    wm = w**fuzziness
    mass = wm.sum(axis=0)
    if np.any(mass < EMPTY_MASS):
        raise DegenerateClusterError("a cluster's total weight mass is zero")
    return (wm.T @ x) / mass[:, None]


def cost(points, means, weights, fuzziness: float) -> float:
    """Clustering cost ``sum_i sum_j w_ij^m ||x_i - c_j||^2``."""
    x = _as_points(points)
    c = np.asarray(means, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != x.shape[1]:
        raise ValueError("means and points must share the feature dimension")
    if w.shape != (x.shape[0], c.shape[0]):
        raise ValueError("weights must be shaped (n_points, n_clusters)")
    d2 = _dist_sq(x, c)
    return float(((w**fuzziness) * d2).sum())


def fit(points, config: FcmConfig) -> FcmModel:
    """Fit cluster means by alternating the mean and membership updates.

    Memberships are initialized uniformly at random per point and
    row-normalized from a generator seeded with ``config.rng_seed``, so the
    fit is deterministic.  Raises ``ValueError`` for fewer points than
    clusters, inconsistent dimensions, or non-finite inputs.
    """
    x = _as_points(points)
    n = x.shape[0]
    if n < config.num_clusters:
        raise ValueError(
            "need at least %d points for %d clusters, got %d"
            % (config.num_clusters, config.num_clusters, n)
        )
    rng = np.random.default_rng(config.rng_seed)
    w0 = rng.random((n, config.num_clusters))
    w0 /= w0.sum(axis=1, keepdims=True)

    runner = _fit_numba if accel.NUMBA_ENABLED else _fit_numpy
    means, _, cost_hist, iters, rescue_mask = runner(
        x, w0, config.fuzziness, config.tolerance, config.max_iterations
    )
    rescues = tuple(int(i) + 1 for i in np.nonzero(rescue_mask)[0])
    return FcmModel(
        means=means,
        dimension=int(x.shape[1]),
        final_cost=float(cost_hist[-1]),
        iterations_used=int(iters),
        cost_history=np.asarray(cost_hist),
        rescue_iterations=rescues,
    )


# ---------------------------------------------------------------------------
# numpy path


def _dist_sq(x: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Squared distances (n, c) via the matmul expansion.

    Entries that come out small are recomputed with the direct difference:
    the expansion loses the low bits to cancellation, and the membership
    zero-distance rule needs exact zeros.
    """
    xsq = np.einsum("ij,ij->i", x, x)
    csq = np.einsum("ij,ij->i", means, means)
    d2 = xsq[:, None] - 2.0 * (x @ means.T) + csq[None, :]
    np.maximum(d2, 0.0, out=d2)
    suspect = d2 < 1e-8
    if suspect.any():
        for i, j in zip(*np.nonzero(suspect)):
            diff = x[i] - means[j]
            d2[i, j] = diff @ diff
    return d2


def _memberships_from_dist(d2: np.ndarray, fuzziness: float) -> np.ndarray:
    """Membership rows from squared distances.

    Rows where the point coincides with one or more means get the analytic
    limit: full weight on the coincident mean, split evenly across ties.
    """
    w = np.empty_like(d2)
    zero = d2 < ZERO_DISTANCE * ZERO_DISTANCE
    hit = zero.any(axis=1)
    if hit.any():
        z = zero[hit].astype(np.float64)
        w[hit] = z / z.sum(axis=1, keepdims=True)
    ok = ~hit
    if ok.any():
        dn = d2[ok]
        expo = 1.0 / (fuzziness - 1.0)
        ratio = dn / dn.min(axis=1, keepdims=True)
        inv = ratio**-expo
        w[ok] = inv / inv.sum(axis=1, keepdims=True)
    return w


def _fit_numpy(x, w, m, tol, max_iter):
    n, _ = x.shape
    c = w.shape[1]
    cost_hist = np.zeros(max_iter)
    rescue_mask = np.zeros(max_iter, dtype=bool)
    means = np.zeros((c, x.shape[1]))
    it = 0
    for it in range(max_iter):
        wm = w**m
        mass = wm.sum(axis=0)
        empty = mass < EMPTY_MASS
        if empty.any():
            rescue_mask[it] = True
            order = np.argsort(w.max(axis=1))
            nonempty = ~empty
            means[nonempty] = (wm.T[nonempty] @ x) / mass[nonempty, None]
            for rank, j in enumerate(np.nonzero(empty)[0]):
                means[j] = x[order[rank % n]]
        else:
            means = (wm.T @ x) / mass[:, None]
        d2 = _dist_sq(x, means)
        w_new = _memberships_from_dist(d2, m)
        cost_hist[it] = ((w_new**m) * d2).sum()
        delta = np.abs(w_new - w).max()
        w = w_new
        if delta < tol:
            break
    n_it = it + 1
    return means, w, cost_hist[:n_it], n_it, rescue_mask[:n_it]


# ---------------------------------------------------------------------------
# numba path (same algorithm, explicit loops; cost uses compensated
# summation so the monotonicity property is not washed out by fold order)


@maybe_jit
def _fit_loops(x, w, m, tol, max_iter):
    n, d = x.shape
    c = w.shape[1]
    means = np.zeros((c, d))
    mass = np.zeros(c)
    d2 = np.zeros(c)
    w_new = np.zeros(c)
    cost_hist = np.zeros(max_iter)
    rescue_mask = np.zeros(max_iter, dtype=np.bool_)
    expo = 1.0 / (m - 1.0)
    z2 = ZERO_DISTANCE * ZERO_DISTANCE
    n_it = 0
    for it in range(max_iter):
        # weighted means
        for j in range(c):
            mass[j] = 0.0
            for k in range(d):
                means[j, k] = 0.0
        for i in range(n):
            for j in range(c):
                wm = w[i, j] ** m
                mass[j] += wm
                for k in range(d):
                    means[j, k] += wm * x[i, k]
        any_empty = False
        for j in range(c):
            if mass[j] < EMPTY_MASS:
                any_empty = True
            else:
                for k in range(d):
                    means[j, k] /= mass[j]
        if any_empty:
            rescue_mask[it] = True
            rowmax = np.zeros(n)
            for i in range(n):
                best = w[i, 0]
                for j in range(1, c):
                    if w[i, j] > best:
                        best = w[i, j]
                rowmax[i] = best
            order = np.argsort(rowmax)
            rank = 0
            for j in range(c):
                if mass[j] < EMPTY_MASS:
                    src = order[rank % n]
                    for k in range(d):
                        means[j, k] = x[src, k]
                    rank += 1
        # memberships, cost, convergence in one pass
        total = 0.0
        comp = 0.0
        delta = 0.0
        for i in range(n):
            n_zero = 0
            for j in range(c):
                acc = 0.0
                for k in range(d):
                    diff = x[i, k] - means[j, k]
                    acc += diff * diff
                d2[j] = acc
                if acc < z2:
                    n_zero += 1
            if n_zero > 0:
                share = 1.0 / n_zero
                for j in range(c):
                    w_new[j] = share if d2[j] < z2 else 0.0
            else:
                dmin = d2[0]
                for j in range(1, c):
                    if d2[j] < dmin:
                        dmin = d2[j]
                ssum = 0.0
                for j in range(c):
                    w_new[j] = (d2[j] / dmin) ** -expo
                    ssum += w_new[j]
                for j in range(c):
                    w_new[j] /= ssum
            for j in range(c):
                term = (w_new[j] ** m) * d2[j]
                y = term - comp
                t = total + y
                comp = (t - total) - y
                total = t
                change = abs(w_new[j] - w[i, j])
                if change > delta:
                    delta = change
                w[i, j] = w_new[j]
        cost_hist[it] = total
        n_it = it + 1
        if delta < tol:
            break
    return means, w, cost_hist[:n_it], n_it, rescue_mask[:n_it]


def _fit_numba(x, w, m, tol, max_iter):
    return _fit_loops(x, w, m, tol, max_iter)
