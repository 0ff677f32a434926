"""Importance-aware feature scheduling.

A feature block is ``B`` real feature vectors of even dimension ``D``
with a per-feature importance weight.  Scheduling happens in three
steps: low-importance rows are zero-masked (``select``), rows are sorted
by descending importance (``sort_by_importance``), and the sorted rows
are mapped onto (time slot, subchannel) cells so that more important
features ride subchannels with higher equivalent SNR.  After
transmission the inverse permutation restores the original order
(``resort``).

Index maps use 0-based slots, subchannels and feature indices.

Single-user map
    With ``spp = B / N`` slots, sorted feature ``b`` occupies subchannel
    ``b // spp`` at slot ``b % spp``: the best ``spp`` features all ride
    subchannel 0, the strongest one.

Multi-user map
    With ``K`` users of ``B`` features each and ``S = K * B / N`` slots,
    the target user rotates as ``slot % K`` and every user transmits
    ``N / K`` streams each slot (the target on its non-null precoder,
    the rest on null-space blocks).  Per user, stream ``j`` carries the
    sorted block ``[j*S, (j+1)*S)``; the block's first ``B / N`` entries
    go out during the user's own target slots (interference-free), the
    remainder rides other users' slots.  Offsets are consumed in the
    order the user's target (resp. non-target) slots occur, which makes
    the map a bijection for every divisible ``(B, N, K)``.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import ConfigError, ShapeError
from .validation import as_real_matrix, as_real_vector, check_positive_int

__all__ = [
    "FeatureBlock",
    "ScheduleMap",
    "select",
    "sort_by_importance",
    "su_assignment",
    "mu_assignment",
    "resort",
    "to_complex_symbols",
    "to_real_features",
    "ImportanceScheduler",
]


@dataclass(frozen=True)
class FeatureBlock:
    """``B x D`` real features plus a length-``B`` importance vector."""

    features: np.ndarray
    importance: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        f = as_real_matrix(self.features, "features")
        w = as_real_vector(self.importance, "importance")
        b, d = f.shape
        if b < 1:
            raise ShapeError("feature block must contain at least one feature")
        if d < 2 or d % 2 != 0:
            raise ShapeError(f"feature dimension must be even and >= 2, got {d}")
        if w.shape[0] != b:
            raise ShapeError(f"importance has length {w.shape[0]}, expected {b}")
        if self.labels is not None and len(self.labels) != b:
            raise ShapeError("labels length must match feature count")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "importance", w)

    @property
    def count(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class ScheduleMap:
    """Permutation plus cell assignment produced by the scheduler.

    ``permutation[r]`` is the original index of the rank-``r`` feature;
    ``inverse`` undoes it (``inverse[i]`` is the rank of original row
    ``i``).  ``assignment`` maps sorted indices to cells: shape
    ``(B, 2)`` of ``(slot, subchannel)`` in single-user mode, or
    ``(K, B, 2)`` of ``(slot, stream)`` per user in multi-user mode.
    """

    permutation: np.ndarray
    inverse: np.ndarray
    assignment: np.ndarray | None = None
    users: int = 1

    def compose_assignment(self, assignment, users=1):
        return ScheduleMap(
            permutation=self.permutation,
            inverse=self.inverse,
            assignment=assignment,
            users=users,
        )


def _identity_map(b):
    idx = np.arange(b)
    return ScheduleMap(permutation=idx, inverse=idx.copy())


def select(block, mu):
    """Zero-mask all but the top ``round(mu * B)`` features by importance.

    The kept count is at least 1 whenever ``mu > 0``; row order is
    unchanged.  Ties in importance break by original index.
    """
    if not 0.0 <= mu <= 1.0:
        raise ConfigError(f"mu must lie in [0, 1], got {mu}")
    b = block.count
    if mu == 0.0:
        keep = 0
    else:
        keep = max(1, min(b, int(np.floor(mu * b + 0.5))))
    order = np.argsort(-block.importance, kind="stable")
    masked = np.zeros_like(block.features)
    kept_rows = order[:keep]
    masked[kept_rows] = block.features[kept_rows]
    return FeatureBlock(features=masked, importance=block.importance, labels=block.labels)


def sort_by_importance(block):
    """Sort rows by descending importance (stable in original index).

    Returns the sorted block and the :class:`ScheduleMap` that recorded
    the move; ``resort`` with the same map restores the original order.
    """
    perm = np.argsort(-block.importance, kind="stable")
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(perm.size)
    labels = None
    if block.labels is not None:
        labels = tuple(block.labels[i] for i in perm)
    sorted_block = FeatureBlock(
        features=block.features[perm],
        importance=block.importance[perm],
        labels=labels,
    )
    return sorted_block, ScheduleMap(permutation=perm, inverse=inverse)


def resort(block, smap):
    """Undo :func:`sort_by_importance` on a (possibly reconstructed) block."""
    if smap.inverse.shape[0] != block.count:
        raise ShapeError(
            f"schedule map covers {smap.inverse.shape[0]} features, block has {block.count}"
        )
    labels = None
    if block.labels is not None:
        labels = tuple(block.labels[i] for i in smap.inverse)
    return FeatureBlock(
        features=block.features[smap.inverse],
        importance=block.importance[smap.inverse],
        labels=labels,
    )


def su_assignment(b_features, n_subchannels):
    """Single-user map of sorted features onto (slot, subchannel) cells."""
    b = check_positive_int(b_features, "b_features")
    n = check_positive_int(n_subchannels, "n_subchannels")
    if b % n != 0:
        raise ConfigError(f"b_features={b} must be divisible by n_subchannels={n}")
    spp = b // n
    idx = np.arange(b)
    assignment = np.column_stack([idx % spp, idx // spp])
    smap = _identity_map(b)
    return smap.compose_assignment(assignment, users=1)


def mu_assignment(b_features, n_tx, users):
    """Multi-user map: per-user sorted features onto (slot, stream) cells.

    Requires ``n_tx % users == 0`` and ``b_features % n_tx == 0``.  The
    epoch has ``users * b_features / n_tx`` slots; each user is the
    target in exactly ``b_features / n_tx`` of them.
    """
    b = check_positive_int(b_features, "b_features")
    n = check_positive_int(n_tx, "n_tx")
    k = check_positive_int(users, "users")
    if n % k != 0:
        raise ConfigError(f"n_tx={n} must be divisible by users={k}")
    if b % n != 0:
        raise ConfigError(f"b_features={b} must be divisible by n_tx={n}")
    streams = n // k
    slots = k * b // n
    target_per_user = b // n
    assignment = np.empty((k, b, 2), dtype=np.int64)
    target_seen = np.zeros(k, dtype=np.int64)
    rider_seen = np.zeros(k, dtype=np.int64)
    for slot in range(slots):
        target = slot % k
        for user in range(k):
            if user == target:
                offset = target_seen[user]
                target_seen[user] += 1
            else:
                offset = target_per_user + rider_seen[user]
                rider_seen[user] += 1
            for j in range(streams):
                assignment[user, j * slots + offset] = (slot, j)
    smap = _identity_map(b)
    return smap.compose_assignment(assignment, users=k)


def to_complex_symbols(features):
    """Pair consecutive reals into complex symbols: ``(B, D) -> (B, D/2)``."""
    f = as_real_matrix(features, "features")
    if f.shape[1] % 2 != 0:
        raise ShapeError("feature dimension must be even")
    return f[:, 0::2] + 1j * f[:, 1::2]


def to_real_features(symbols):
    """Inverse of :func:`to_complex_symbols`."""
    s = np.asarray(symbols, dtype=np.complex128)
    if s.ndim != 2:
        raise ShapeError("symbols must be 2-D")
    out = np.empty((s.shape[0], 2 * s.shape[1]), dtype=np.float64)
    out[:, 0::2] = s.real
    out[:, 1::2] = s.imag
    return out


class ImportanceScheduler(BaseEstimator):
    """Estimator-style wrapper: fit on importance, transform feature rows.

    ``transform`` applies select + sort; ``inverse_transform`` restores
    the original row order.
    """

    def __init__(self, select_fraction=1.0, n_subchannels=None, users=1):
        self.select_fraction = select_fraction
        self.n_subchannels = n_subchannels
        self.users = users

    def fit(self, importance, y=None):
        w = as_real_vector(np.asarray(importance, dtype=np.float64), "importance")
        self.importance_ = w
        perm = np.argsort(-w, kind="stable")
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        assignment = None
        if self.n_subchannels is not None:
            if self.users > 1:
                assignment = mu_assignment(w.size, self.n_subchannels, self.users).assignment
            else:
                assignment = su_assignment(w.size, self.n_subchannels).assignment
        self.map_ = ScheduleMap(
            permutation=perm, inverse=inverse, assignment=assignment, users=self.users
        )
        return self

    def _require_fitted(self):
        if not hasattr(self, "map_"):
            raise NotFittedError("ImportanceScheduler must be fitted first")

    def transform(self, features):
        self._require_fitted()
        block = FeatureBlock(features=features, importance=self.importance_)
        masked = select(block, self.select_fraction)
        return masked.features[self.map_.permutation]

    def inverse_transform(self, features):
        self._require_fitted()
        f = as_real_matrix(features, "features")
        if f.shape[0] != self.map_.inverse.shape[0]:
            raise ShapeError("feature count does not match the fitted map")
        return f[self.map_.inverse]
