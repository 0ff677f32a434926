"""Rayleigh MIMO channel sampling, AWGN, and pilot transmission.

The physical model is ``y = H @ x + n`` with ``H`` drawn entrywise from a
circularly symmetric complex Gaussian distribution and ``n`` white
complex Gaussian noise whose variance follows from a target SNR.

Randomness discipline
---------------------
Every sampling function takes an explicit :class:`numpy.random.Generator`
(or a seed); nothing touches global state.  Experiment code derives
independent streams with :func:`derive_rng`, which maps
``(seed, purpose, *indices)`` to a generator through
``numpy.random.SeedSequence(seed, spawn_key=...)``.  The mapping is pure,
so trials can run in any order or in parallel and still reproduce
bit-identical draws.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .validation import as_complex_matrix, check_positive_int

__all__ = [
    "CONVENTIONS",
    "PURPOSE_CHANNEL",
    "PURPOSE_NOISE",
    "PURPOSE_PILOT_NOISE",
    "PURPOSE_FEATURES",
    "PURPOSE_POLICY",
    "ChannelRealization",
    "NoiseSpec",
    "PilotBlock",
    "entry_variance",
    "derive_rng",
    "sample_rayleigh",
    "sample_noise",
    "transmit",
    "send_pilots",
]

#: Supported entry-variance conventions for the channel matrix.
#: ``unit``           -> E|h|^2 = 1
#: ``per_entry_half`` -> E|h|^2 = 1/2
#: ``over_n``         -> E|h|^2 = 1/N  (N = transmit antenna count)
CONVENTIONS = ("unit", "per_entry_half", "over_n")

# Stream purposes for derive_rng. Fixed small integers; changing them
# changes every seeded result, so they are part of the package contract.
PURPOSE_CHANNEL = 0
PURPOSE_NOISE = 1
PURPOSE_PILOT_NOISE = 2
PURPOSE_FEATURES = 3
PURPOSE_POLICY = 4


def derive_rng(seed, *key):
    """Return a Generator for stream ``key`` derived from ``seed``.

    The rule is ``default_rng(SeedSequence(seed, spawn_key=key))``.
    Distinct keys give statistically independent streams; the same
    ``(seed, key)`` always gives the same stream.
    """
    spawn_key = tuple(int(k) for k in key)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))


def entry_variance(convention, n_tx):
    """Per-entry complex variance implied by a convention name."""
    if convention == "unit":
        return 1.0
    if convention == "per_entry_half":
        return 0.5
    if convention == "over_n":
        return 1.0 / n_tx
    raise ConfigError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the (stacked) MIMO channel.

    ``h`` has ``users * m_rx`` rows and ``n_tx`` columns; user ``k``
    owns the row slice ``[k * m_rx, (k + 1) * m_rx)``.
    """

    h: np.ndarray
    n_tx: int
    m_rx: int
    users: int
    entry_variance: float

    def user_channel(self, k):
        """Rows of ``h`` belonging to user ``k``."""
        if not 0 <= k < self.users:
            raise ConfigError(f"user index {k} out of range for {self.users} users")
        return self.h[k * self.m_rx : (k + 1) * self.m_rx]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level expressed as an SNR against a signal power.

    ``signal_power`` is the average per-symbol power of the transmitted
    block in linear units.  When it is ``None`` the power is measured
    empirically from the block being transmitted, which keeps ``snr_db``
    self-consistent regardless of how symbols were scaled upstream.
    ``snr_db = inf`` disables noise entirely.
    """

    snr_db: float
    signal_power: float | None = None

    def variance(self, x=None):
        """Noise variance per complex sample for transmit block ``x``."""
        if math.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        if self.signal_power is not None:
            power = float(self.signal_power)
        else:
            if x is None:
                raise ConfigError("empirical signal power requires the transmit block")
            power = float(np.mean(np.abs(x) ** 2))
        return power / (10.0 ** (self.snr_db / 10.0))


def _mu_dimension_check(n_tx, m_rx, users):
    if users > 1:
        if n_tx % users != 0:
            raise ConfigError(
                f"n_tx={n_tx} must be a multiple of users={users} for multi-user operation"
            )
        if users * m_rx < n_tx:
            raise ConfigError(
                f"users*m_rx={users * m_rx} must be at least n_tx={n_tx}"
            )
        if n_tx <= m_rx:
            raise ConfigError(f"n_tx={n_tx} must exceed m_rx={m_rx} for multi-user operation")


def sample_rayleigh(n_tx, m_rx, users=1, convention="unit", rng=None):
    """Draw one i.i.d. Rayleigh-fading channel realization.

    Parameters
    ----------
    n_tx, m_rx, users : int
        Transmit antennas, receive antennas per user, user count.
    convention : str
        Entry-variance convention, one of :data:`CONVENTIONS`.
    rng : numpy.random.Generator or int or None
        Source of randomness.

    Returns
    -------
    ChannelRealization
    """
    n_tx = check_positive_int(n_tx, "n_tx")
    m_rx = check_positive_int(m_rx, "m_rx")
    users = check_positive_int(users, "users")
    _mu_dimension_check(n_tx, m_rx, users)
    var = entry_variance(convention, n_tx)
    rng = np.random.default_rng(rng)
    scale = math.sqrt(var / 2.0)
    shape = (users * m_rx, n_tx)
    h = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return ChannelRealization(h=h, n_tx=n_tx, m_rx=m_rx, users=users, entry_variance=var)


def sample_noise(shape, variance, rng):
    """Circularly symmetric complex Gaussian noise with the given variance."""
    if variance == 0.0:
        return np.zeros(shape, dtype=np.complex128)
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _channel_matrix(channel):
    if isinstance(channel, ChannelRealization):
        return channel.h
    return as_complex_matrix(channel, "channel")


def transmit(channel, x_tilde, noise=None, rng=None):
    """Apply the physical channel: ``y = H @ x_tilde + n``.

    ``x_tilde`` may carry any number of columns (symbols); noise is drawn
    i.i.d. per sample.  With ``noise=None`` or ``snr_db=inf`` the output
    is noiseless.
    """
    h = _channel_matrix(channel)
    x_tilde = as_complex_matrix(x_tilde, "x_tilde")
    if x_tilde.shape[0] != h.shape[1]:
        raise ShapeError(
            f"x_tilde has {x_tilde.shape[0]} rows, channel expects {h.shape[1]}"
        )
    y = h @ x_tilde
    if noise is None:
        return y
    var = noise.variance(x_tilde)
    if var == 0.0:
        return y
    if rng is None:
        raise ConfigError("noisy transmission requires an rng")
    return y + sample_noise(y.shape, var, np.random.default_rng(rng))


@dataclass(frozen=True)
class PilotBlock:
    """Known transmit block used for channel estimation.

    ``x_p`` is ``n_tx x length`` with ``length >= n_tx`` and full row
    rank.  The default construction is a DFT matrix slice: orthogonal
    rows with unit per-symbol power.
    """

    x_p: np.ndarray

    def __post_init__(self):
        x = as_complex_matrix(self.x_p, "pilots")
        n, p = x.shape
        if p < n:
            raise ConfigError(f"pilot length {p} is shorter than n_tx={n}")
        s = np.linalg.svd(x, compute_uv=False)
        if s[0] == 0.0 or s[-1] <= max(n, p) * s[0] * 1e-12:
            raise ConfigError("pilot block must have full row rank")
        object.__setattr__(self, "x_p", x)

    @property
    def n_tx(self):
        return self.x_p.shape[0]

    @property
    def length(self):
        return self.x_p.shape[1]

    @classmethod
    def orthogonal(cls, n_tx, length=None):
        """Unit-power orthogonal pilots (first ``n_tx`` rows of a DFT)."""
        n_tx = check_positive_int(n_tx, "n_tx")
        length = n_tx if length is None else check_positive_int(length, "length")
        if length < n_tx:
            raise ConfigError(f"pilot length {length} is shorter than n_tx={n_tx}")
        idx = np.arange(length)
        x = np.exp(-2j * np.pi * np.outer(idx[:n_tx], idx) / length)
        return cls(x_p=x)


def send_pilots(channel, pilots, noise=None, rng=None):
    """Transmit a pilot block: ``y_p = H @ x_p + n_p``."""
    h = _channel_matrix(channel)
    if pilots.x_p.shape[0] != h.shape[1]:
        raise ShapeError(
            f"pilots have {pilots.x_p.shape[0]} rows, channel expects {h.shape[1]}"
        )
    return transmit(h, pilots.x_p, noise=noise, rng=rng)
