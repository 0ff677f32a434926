"""SVD precoding for single-user and multi-user MIMO links.

Single-user
    ``SuPrecoder`` decomposes the channel ``H = U diag(g) V^H`` and
    exposes ``precode`` (``x -> V x``) and ``equalize`` (``y -> U^H y``),
    under which the link becomes ``min(N, M)`` parallel scalar
    subchannels with gains ``g`` and per-subchannel SNRs ``g^2 * snr``.

Multi-user
    ``MuPrecoder`` performs one SVD per user channel and partitions the
    right singular vectors into a non-null block (carrying that user's
    streams) and ``K - 1`` null-space blocks.  Superimposing other
    users' symbols on the null blocks makes the target user's reception
    free of multi-user interference; the riders themselves accept
    interference by design.

Both precoders follow the scikit-learn estimator protocol: ``fit`` on a
channel, then ``transform`` / ``inverse_transform`` on symbol blocks.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .channel import ChannelRealization
from .errors import ConfigError, DegenerateChannelError, ShapeError
from .linalg import diag_extended, svd
from .validation import as_complex_matrix

__all__ = [
    "EquivalentSubchannels",
    "equivalent_snrs_from_gains",
    "SuPrecoder",
    "MuUserPrecoder",
    "MuPrecoder",
    "decompose_user",
]


@dataclass(frozen=True)
class EquivalentSubchannels:
    """Per-subchannel gains and SNRs of a decomposed MIMO link.

    ``snrs_db`` uses ``-inf`` for zero-gain subchannels.
    """

    gains: np.ndarray
    snrs_linear: np.ndarray
    snrs_db: np.ndarray


def equivalent_snrs_from_gains(gains, snr_db):
    """SNR seen by each scalar subchannel: ``gain^2`` times the link SNR."""
    gains = np.asarray(gains, dtype=np.float64)
    if not np.isfinite(snr_db):
        raise ConfigError("snr_db must be finite for equivalent SNR computation")
    snr_linear = 10.0 ** (snr_db / 10.0)
    lin = gains**2 * snr_linear
    with np.errstate(divide="ignore"):
        db = np.where(gains > 0.0, snr_db + 20.0 * np.log10(np.maximum(gains, 1e-300)), -np.inf)
    return EquivalentSubchannels(gains=gains, snrs_linear=lin, snrs_db=db)


def _as_su_matrix(channel):
    if isinstance(channel, ChannelRealization):
        if channel.users != 1:
            raise ConfigError("SuPrecoder requires a single-user channel")
        return channel.h
    return as_complex_matrix(channel, "channel")


class SuPrecoder(BaseEstimator):
    """Single-user SVD precoder / equalizer.

    After ``fit(h)`` the instance carries ``svd_`` (the decomposition),
    ``gains_`` (singular values, descending) and ``q_``
    (``min(n_tx, m_rx)``, the usable subchannel count).
    """

    def fit(self, channel, y=None):
        h = _as_su_matrix(channel)
        self.svd_ = svd(h)
        self.m_rx_, self.n_tx_ = h.shape
        self.q_ = min(self.n_tx_, self.m_rx_)
        self.gains_ = self.svd_.sigma
        return self

    def _require_fitted(self):
        if not hasattr(self, "svd_"):
            raise NotFittedError("SuPrecoder must be fitted on a channel first")

    def precode(self, x):
        """Map symbol block ``x`` (rows = transmit streams) to ``V x``."""
        self._require_fitted()
        x = as_complex_matrix(x, "x")
        if x.shape[0] != self.n_tx_:
            raise ShapeError(f"x has {x.shape[0]} rows, expected {self.n_tx_}")
        return self.svd_.v @ x

    def equalize(self, y):
        """Map received block ``y`` to ``U^H y``."""
        self._require_fitted()
        y = as_complex_matrix(y, "y")
        if y.shape[0] != self.m_rx_:
            raise ShapeError(f"y has {y.shape[0]} rows, expected {self.m_rx_}")
        return self.svd_.u.conj().T @ y

    # estimator-protocol aliases
    transform = precode
    inverse_transform = equalize

    def gain_matrix(self):
        """``diag_extended(gains)`` of shape ``(m_rx, n_tx)``."""
        self._require_fitted()
        return diag_extended(self.gains_, self.m_rx_, self.n_tx_)

    def equivalent_snrs(self, snr_db):
        """Per-subchannel SNRs at a given link SNR (dB)."""
        self._require_fitted()
        return equivalent_snrs_from_gains(self.gains_, snr_db)


@dataclass(frozen=True)
class MuUserPrecoder:
    """Per-user pieces of the one-SVD multi-user decomposition.

    ``v_nonzero`` spans the row space of this user's channel restricted
    to ``n_tx / users`` columns; every column of every entry of
    ``v_zero_blocks`` lies in the channel's null space, so symbols
    carried there do not reach this user.
    """

    user_index: int
    u: np.ndarray
    gains: np.ndarray
    v_nonzero: np.ndarray
    v_zero_blocks: tuple

    @property
    def streams(self):
        return self.v_nonzero.shape[1]


def decompose_user(h_k, user_index, users):
    """Split one user's channel into non-null and null-space precoders.

    Parameters
    ----------
    h_k : array_like
        The user's ``m_rx x n_tx`` channel.
    user_index : int
        Which user this is (bookkeeping only).
    users : int
        Total user count ``K``; the null space is partitioned into
        ``K - 1`` blocks of ``n_tx / K`` columns, in column order.

    Raises
    ------
    DegenerateChannelError
        If the channel is numerically rank deficient (callers resample).
    ConfigError
        If the dimensions cannot host the null-space blocks.
    """
    h_k = as_complex_matrix(h_k, "h_k")
    m, n = h_k.shape
    if users < 1 or n % users != 0:
        raise ConfigError(f"n_tx={n} must be a multiple of users={users}")
    per_user = n // users
    if users > 1 and n - m < (users - 1) * per_user:
        raise ConfigError(
            f"null space of a {m}x{n} channel cannot host {users - 1} blocks of {per_user}"
        )
    triple = svd(h_k)
    s = triple.sigma
    if s[0] == 0.0 or int(np.count_nonzero(s > s[0] * 1e-10)) < m:
        raise DegenerateChannelError(
            f"user {user_index} channel is numerically rank deficient"
        )
    keep = min(m, per_user)
    v_nonzero = triple.v[:, :keep]
    if keep < per_user:
        pad = np.zeros((n, per_user - keep), dtype=np.complex128)
        v_nonzero = np.hstack([v_nonzero, pad])
    blocks = []
    null_cols = triple.v[:, m:]
    for b in range(users - 1):
        blocks.append(null_cols[:, b * per_user : (b + 1) * per_user])
    return MuUserPrecoder(
        user_index=user_index,
        u=triple.u,
        gains=s,
        v_nonzero=v_nonzero,
        v_zero_blocks=tuple(blocks),
    )


class MuPrecoder(BaseEstimator):
    """One-SVD multi-user precoder over a stacked channel.

    Parameters
    ----------
    users : int
        User count ``K``.  ``fit`` expects the stacked
        ``(K * m_rx) x n_tx`` channel (or a :class:`ChannelRealization`)
        with ``n_tx`` a multiple of ``K`` and ``K * m_rx >= n_tx > m_rx``.
    """

    def __init__(self, users=2):
        self.users = users

    def fit(self, channel, y=None):
        if isinstance(channel, ChannelRealization):
            if channel.users != self.users:
                raise ConfigError(
                    f"channel carries {channel.users} users, precoder expects {self.users}"
                )
            h = channel.h
            m_rx = channel.m_rx
        else:
            h = as_complex_matrix(channel, "channel")
            if h.shape[0] % self.users != 0:
                raise ShapeError(
                    f"stacked channel rows {h.shape[0]} not divisible by users={self.users}"
                )
            m_rx = h.shape[0] // self.users
        n = h.shape[1]
        if self.users < 1:
            raise ConfigError("users must be >= 1")
        if n % self.users != 0:
            raise ConfigError(f"n_tx={n} must be a multiple of users={self.users}")
        if self.users > 1:
            if self.users * m_rx < n:
                raise ConfigError(f"users*m_rx={self.users * m_rx} must be at least n_tx={n}")
            if n <= m_rx:
                raise ConfigError(f"n_tx={n} must exceed m_rx={m_rx}")
        self.n_tx_ = n
        self.m_rx_ = m_rx
        self.streams_ = n // self.users
        self.per_user_ = tuple(
            decompose_user(h[k * m_rx : (k + 1) * m_rx], k, self.users)
            for k in range(self.users)
        )
        return self

    def _require_fitted(self):
        if not hasattr(self, "per_user_"):
            raise NotFittedError("MuPrecoder must be fitted on a channel first")

    def precode(self, target, x_all):
        """Superpose all users' symbols through the target's decomposition.

        ``x_all`` is a length-``K`` sequence; entry ``k`` is user ``k``'s
        ``streams x cols`` symbol block.  The target's block rides
        ``v_nonzero``; the remaining users ride the null-space blocks in
        increasing user order.
        """
        self._require_fitted()
        if not 0 <= target < self.users:
            raise ConfigError(f"target={target} out of range for {self.users} users")
        if len(x_all) != self.users:
            raise ShapeError(f"x_all must have {self.users} entries, got {len(x_all)}")
        blocks = self.per_user_[target]
        xs = [as_complex_matrix(x, f"x_all[{k}]") for k, x in enumerate(x_all)]
        cols = xs[0].shape[1]
        for k, x in enumerate(xs):
            if x.shape != (self.streams_, cols):
                raise ShapeError(
                    f"x_all[{k}] has shape {x.shape}, expected {(self.streams_, cols)}"
                )
        out = blocks.v_nonzero @ xs[target]
        others = [k for k in range(self.users) if k != target]
        for block, k in zip(blocks.v_zero_blocks, others):
            out = out + block @ xs[k]
        return out

    def equalize(self, k, y_k):
        """Equalize user ``k``'s received block with its own ``U^H``."""
        self._require_fitted()
        y_k = as_complex_matrix(y_k, "y_k")
        if y_k.shape[0] != self.m_rx_:
            raise ShapeError(f"y_k has {y_k.shape[0]} rows, expected {self.m_rx_}")
        return self.per_user_[k].u.conj().T @ y_k

    def user_gains(self, k):
        """Per-stream gains seen by user ``k`` while it is the target."""
        self._require_fitted()
        return self.per_user_[k].gains[: self.streams_]

    def equivalent_snrs(self, k, snr_db):
        """Per-stream SNRs for user ``k`` while it is the target."""
        return equivalent_snrs_from_gains(self.user_gains(k), snr_db)
