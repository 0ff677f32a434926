"""Dense complex linear algebra kernel.

Thin, contract-checked wrappers around LAPACK (via numpy) providing the
handful of operations the rest of the package builds on: products,
Hermitian transpose, a singular value decomposition with a deterministic
phase convention, and a Moore-Penrose pseudo-inverse with a documented
cutoff.

The SVD returned here is normalized so that the first nonzero component
of every column of ``v`` (and of the trailing columns of ``u`` that have
no paired singular value) is real and positive.  Plain LAPACK output is
unique only up to a per-column phase; fixing it makes decompositions
reproducible across runs, which the simulation harness relies on.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError
from .validation import as_complex_matrix

__all__ = [
    "SvdTriple",
    "matmul",
    "hermitian",
    "svd",
    "pinv",
    "diag_extended",
]

# Relative magnitude below which a component is treated as zero when
# locating the anchor entry for the phase convention.
_PHASE_EPS = 1e-12


@dataclass(frozen=True)
class SvdTriple:
    """Result of :func:`svd`: ``a = u @ diag_extended(sigma) @ v^H``.

    Attributes
    ----------
    u : np.ndarray
        Unitary ``(rows, rows)`` matrix of left singular vectors.
    sigma : np.ndarray
        Singular values, length ``min(rows, cols)``, sorted descending.
    v : np.ndarray
        Unitary ``(cols, cols)`` matrix of right singular vectors
        (columns, not the conjugate transpose).
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank_bound(self):
        return self.sigma.size

    def reconstruct(self):
        """Return ``u @ diag_extended(sigma) @ v^H``."""
        m = self.u.shape[0]
        n = self.v.shape[0]
        return self.u @ diag_extended(self.sigma, m, n) @ self.v.conj().T


def matmul(a, b):
    """Complex matrix product with an explicit inner-dimension check."""
    a = as_complex_matrix(a, "left operand")
    b = as_complex_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def hermitian(a):
    """Conjugate transpose."""
    return as_complex_matrix(a).conj().T


def _fix_phases(u, sigma, v):
    """Rotate singular vector pairs so each v-column anchor is real positive.

    Paired columns (those with a singular value) must be rotated together
    to preserve the factorization; surplus columns of ``u`` are rotated
    against their own anchor for determinism.
    """
    q = sigma.size
    for j in range(v.shape[1]):
        col = v[:, j]
        anchors = np.abs(col) > _PHASE_EPS
        if not anchors.any():
            continue
        k = int(np.argmax(anchors))
        phase = col[k] / abs(col[k])
        v[:, j] = col * np.conj(phase)
        if j < q:
            u[:, j] = u[:, j] * np.conj(phase)
    for j in range(q, u.shape[1]):
        col = u[:, j]
        anchors = np.abs(col) > _PHASE_EPS
        if not anchors.any():
            continue
        k = int(np.argmax(anchors))
        phase = col[k] / abs(col[k])
        u[:, j] = col * np.conj(phase)
    return u, v


def svd(a):
    """Full singular value decomposition with deterministic phases.

    Parameters
    ----------
    a : array_like
        Matrix with finite entries.

    Returns
    -------
    SvdTriple
        ``u`` is ``(m, m)``, ``sigma`` has length ``min(m, n)`` sorted in
        descending order, ``v`` is ``(n, n)``.

    Raises
    ------
    NumericError
        When the backend iteration fails to converge.
    """
    a = as_complex_matrix(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare LAPACK failure
        raise NumericError(
            f"SVD failed to converge for shape {a.shape}", detail=str(exc)
        ) from exc
    u = np.ascontiguousarray(u)
    v = np.ascontiguousarray(vh.conj().T)
    u, v = _fix_phases(u, s, v)
    return SvdTriple(u=u, sigma=s, v=v)


def pinv(a):
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values at or below ``max(rows, cols) * sigma_1 * 1e-12`` are
    treated as zero, so a zero matrix maps to a zero matrix.
    """
    a = as_complex_matrix(a)
    m, n = a.shape
    triple = svd(a)
    s = triple.sigma
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, m), dtype=np.complex128)
    cutoff = max(m, n) * s[0] * 1e-12
    r = int(np.count_nonzero(s > cutoff))
    if r == 0:
        return np.zeros((n, m), dtype=np.complex128)
    return (triple.v[:, :r] / s[:r]) @ triple.u[:, :r].conj().T


def diag_extended(sigma, rows, cols):
    """Embed a vector on the main diagonal of a ``rows x cols`` zero matrix."""
    sigma = np.asarray(sigma, dtype=np.float64)
    out = np.zeros((rows, cols), dtype=np.complex128)
    q = min(rows, cols, sigma.size)
    out[np.arange(q), np.arange(q)] = sigma[:q]
    return out
