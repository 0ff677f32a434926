"""Pilot-based channel estimation: LS, linear-MMSE, and a refinement hook.

The least-squares estimate is ``H_ls = Y_p pinv(X_p)``.  The MMSE
estimate regularizes the pilot Gram matrix under an i.i.d. complex
Gaussian channel prior; for orthogonal unit-power pilots of length ``P``
it reduces to the entrywise shrinkage
``H_mmse = v / (v + noise_var / P) * H_ls``.

A learned refiner can be plugged in through :func:`refine`, which takes
any callable mapping a pre-estimate to an improved estimate.  The total
squared error metric :func:`estimation_mse` is the quantity such a
refiner would be trained against.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .channel import ChannelRealization, PilotBlock
from .errors import EstimationError, ShapeError
from .linalg import pinv
from .validation import as_complex_matrix

__all__ = [
    "ChannelEstimate",
    "ls_estimate",
    "mmse_estimate",
    "refine",
    "estimation_mse",
    "LeastSquaresChannelEstimator",
    "MmseChannelEstimator",
]


@dataclass(frozen=True)
class ChannelEstimate:
    """An estimated channel matrix and the method that produced it."""

    h_hat: np.ndarray
    method: str
    mse_vs_truth: float | None = None

    def with_truth(self, h_true):
        """Return a copy annotated with its error against the true channel."""
        return ChannelEstimate(
            h_hat=self.h_hat,
            method=self.method,
            mse_vs_truth=estimation_mse(h_true, self),
        )


def _check_pilot_obs(y_p, pilots):
    y_p = as_complex_matrix(y_p, "y_p")
    if not isinstance(pilots, PilotBlock):
        pilots = PilotBlock(x_p=pilots)
    if y_p.shape[1] != pilots.length:
        raise ShapeError(
            f"y_p has {y_p.shape[1]} columns, pilots have {pilots.length}"
        )
    return y_p, pilots


def ls_estimate(y_p, pilots):
    """Least-squares channel estimate from a pilot observation."""
    y_p, pilots = _check_pilot_obs(y_p, pilots)
    return ChannelEstimate(h_hat=y_p @ pinv(pilots.x_p), method="ls")


def mmse_estimate(y_p, pilots, noise, prior_variance):
    """Linear-MMSE channel estimate under an i.i.d. Gaussian prior.

    Parameters
    ----------
    noise : NoiseSpec
        Noise level of the pilot observation; the variance is evaluated
        against the pilot block itself when no signal power is pinned.
    prior_variance : float
        Per-entry complex variance of the channel prior.
    """
    y_p, pilots = _check_pilot_obs(y_p, pilots)
    if prior_variance <= 0.0:
        raise EstimationError(f"prior_variance must be positive, got {prior_variance}")
    x = pilots.x_p
    noise_var = noise.variance(x)
    if noise_var == 0.0:
        return ChannelEstimate(h_hat=y_p @ pinv(x), method="mmse")
    gram = x @ x.conj().T + (noise_var / prior_variance) * np.eye(x.shape[0])
    h_hat = np.linalg.solve(gram.T, (y_p @ x.conj().T).T).T
    return ChannelEstimate(h_hat=h_hat, method="mmse")


def refine(estimate, hook=None):
    """Apply a refinement hook (default: identity) to a pre-estimate.

    The hook must be a side-effect-free callable returning a matrix of
    the same shape.
    """
    if hook is None:
        refined = np.array(estimate.h_hat, copy=True)
    else:
        refined = as_complex_matrix(hook(estimate.h_hat), "refined estimate")
    if refined.shape != estimate.h_hat.shape:
        raise EstimationError(
            f"refinement hook changed the shape {estimate.h_hat.shape} -> {refined.shape}"
        )
    return ChannelEstimate(h_hat=refined, method="refined")


def estimation_mse(h_true, estimate):
    """Total squared error ``sum |H - H_hat|^2`` over all entries."""
    if isinstance(h_true, ChannelRealization):
        h_true = h_true.h
    h_true = as_complex_matrix(h_true, "h_true")
    h_hat = estimate.h_hat if isinstance(estimate, ChannelEstimate) else estimate
    h_hat = as_complex_matrix(h_hat, "h_hat")
    if h_true.shape != h_hat.shape:
        raise ShapeError(f"shape mismatch {h_true.shape} vs {h_hat.shape}")
    return float(np.sum(np.abs(h_true - h_hat) ** 2))


class LeastSquaresChannelEstimator(BaseEstimator):
    """Estimator-protocol wrapper around :func:`ls_estimate`."""

    def fit(self, pilots, y_p):
        self.estimate_ = ls_estimate(y_p, pilots)
        self.channel_ = self.estimate_.h_hat
        return self

    def error(self, h_true):
        if not hasattr(self, "estimate_"):
            raise NotFittedError("estimator has not been fitted")
        return estimation_mse(h_true, self.estimate_)


class MmseChannelEstimator(BaseEstimator):
    """Estimator-protocol wrapper around :func:`mmse_estimate`."""

    def __init__(self, prior_variance=1.0):
        self.prior_variance = prior_variance

    def fit(self, pilots, y_p, noise=None):
        if noise is None:
            raise EstimationError("MMSE estimation requires a NoiseSpec")
        self.estimate_ = mmse_estimate(y_p, pilots, noise, self.prior_variance)
        self.channel_ = self.estimate_.h_hat
        return self

    def error(self, h_true):
        if not hasattr(self, "estimate_"):
            raise NotFittedError("estimator has not been fitted")
        return estimation_mse(h_true, self.estimate_)
