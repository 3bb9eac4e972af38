"""Symmetric low-rank matrices stored as ``L @ D @ L.T``.

Every quantity the integrators handle (states, right-hand sides, stage
differences, error estimates) lives in this factored form. Arithmetic never
builds the N x N matrix.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .errors import DimensionError

DEFAULT_TOL = 1e-12

# eigenvalues below this multiple of eps * scale are treated as roundoff
_NOISE_FACTOR = 64.0


@dataclass(frozen=True, eq=False)
class LowRankSym:
    """Symmetric matrix ``X = L D L^T`` with a tall basis and a small core.

    Parameters
    ----------
    L
        Basis, shape ``(n, r)``. ``r == 0`` encodes the zero matrix.
    D
        Core, shape ``(r, r)``; a 1-D array is taken as a diagonal.
        Symmetrized as ``(D + D^T) / 2`` on construction.
    orthonormal
        Set when ``L^T L = I`` is known (e.g. after :func:`compress`); lets
        :func:`fro_norm` read the norm straight off ``D``.
    """

    L: np.ndarray
    D: np.ndarray
    orthonormal: bool = field(default=False)

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        D = np.asarray(self.D, dtype=float)
        if L.ndim == 1:
            L = L[:, np.newaxis]
        if D.ndim == 0:
            D = D.reshape(1, 1)
        elif D.ndim == 1:
            D = np.diag(D)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise DimensionError(f"core must be square, got shape {D.shape}")
        if L.ndim != 2 or L.shape[1] != D.shape[0]:
            raise DimensionError(
                f"basis has {L.shape[1] if L.ndim == 2 else '?'} columns but core is {D.shape}")
        D = 0.5 * (D + D.T)
        L.setflags(write=False)
        D.setflags(write=False)
        object.__setattr__(self, 'L', L)
        object.__setattr__(self, 'D', D)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, 0)), np.zeros((0, 0)), orthonormal=True)

    @classmethod
    def from_factor(cls, Z):
        """``Z Z^T`` for a tall factor ``Z``."""
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, np.newaxis]
        return cls(Z, np.eye(Z.shape[1]))

    @classmethod
    def from_dense(cls, X, tol=DEFAULT_TOL):
        """Factor a dense symmetric matrix by eigendecomposition."""
        X = np.asarray(X, dtype=float)
        lam, V = np.linalg.eigh(0.5 * (X + X.T))
        return compress(cls(V, np.diag(lam), orthonormal=True), tol)

    @property
    def n(self):
        return self.L.shape[0]

    @property
    def rank(self):
        return self.D.shape[0]

    def to_dense(self):
        return self.L @ self.D @ self.L.T

    def scaled(self, c):
        return LowRankSym(self.L, c * self.D, orthonormal=self.orthonormal)

    def __repr__(self):
        return f"LowRankSym(n={self.n}, rank={self.rank})"


def assemble(terms):
    """Concatenate ``sum_k g_k X_k`` into one factored matrix.

    Parameters
    ----------
    terms
        Non-empty sequence of ``(g_k, X_k)`` pairs.

    Returns
    -------
    LowRankSym
        Basis ``[L_1, ..., L_m]`` and core ``blkdiag(g_1 D_1, ..., g_m D_m)``.
        No compression is applied.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("assemble needs at least one term")
    n = terms[0][1].n
    for i, (_, X) in enumerate(terms):
        if X.n != n:
            raise DimensionError(
                f"term {i} has {X.n} rows, expected {n}", index=i)
    L = np.hstack([X.L for _, X in terms])
    D = spla.block_diag(*[g * X.D for g, X in terms]) if L.shape[1] else np.zeros((0, 0))
    return LowRankSym(L, np.asarray(D).reshape(L.shape[1], L.shape[1]))


def compress(X, tol_rel=DEFAULT_TOL, rank_cap=None):
    """Truncate ``X`` to minimal rank with an orthonormal basis.

    Thin QR ``L = Q R`` followed by ``R D R^T = V diag(lam) V^T``. The
    smallest eigenvalues are dropped while the discarded part stays within
    ``tol_rel * ||X||_F``; eigenvalues at roundoff level relative to the
    factor magnitudes are always dropped so exact cancellations give rank 0.
    """
    if tol_rel < 0:
        raise ValueError("tol_rel must be nonnegative")
    n, r = X.L.shape
    if r == 0:
        return LowRankSym.zeros(n)
    Q, R = spla.qr(X.L, mode='economic', check_finite=True)
    S = R @ X.D @ R.T
    lam, V = spla.eigh(0.5 * (S + S.T), check_finite=False)

    absR = np.abs(R)
    scale = np.linalg.norm(absR @ np.abs(X.D) @ absR.T)
    order = np.argsort(np.abs(lam))
    mag = np.abs(lam[order])
    keep = mag > _NOISE_FACTOR * np.finfo(float).eps * scale
    if tol_rel > 0 and keep.any():
        total = np.linalg.norm(mag[keep])
        dropped = np.sqrt(np.cumsum(mag ** 2))
        keep &= dropped > tol_rel * total
    idx = order[keep][::-1]  # descending magnitude
    if rank_cap is not None:
        idx = idx[:rank_cap]
    return LowRankSym(Q @ V[:, idx], np.diag(lam[idx]), orthonormal=True)


def fro_norm(X):
    """Frobenius norm of ``L D L^T`` from r x r quantities only.

    Uses ``trace((L^T L D)^2)^(1/2)``, or ``||D||_F`` for an orthonormal basis.
    """
    if X.rank == 0:
        return 0.0
    if X.orthonormal:
        return float(np.linalg.norm(X.D))
    M = (X.L.T @ X.L) @ X.D
    return float(np.sqrt(max(np.sum(M * M.T), 0.0)))
