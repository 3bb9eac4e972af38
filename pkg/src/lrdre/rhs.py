"""Riccati problem data and factored right-hand side pieces."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError
from .lowrank import DEFAULT_TOL, LowRankSym, compress, fro_norm


@dataclass(frozen=True, eq=False)
class RiccatiProblem:
    """``X' = A X + X A^T + C^T C - X B B^T X``, ``X(0) = X0``."""

    A: sp.csr_matrix
    C: np.ndarray
    B: np.ndarray
    X0: LowRankSym

    def __post_init__(self):
        A = self.A.tocsr() if sp.issparse(self.A) else sp.csr_matrix(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, np.newaxis]
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns, expected {n}")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
        if self.X0.n != n:
            raise DimensionError(f"X0 has {self.X0.n} rows, expected {n}")
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'C', C)
        object.__setattr__(self, 'B', B)

    @property
    def n(self):
        return self.A.shape[0]

    def with_initial(self, X0):
        return RiccatiProblem(self.A, self.C, self.B, X0)


def _check(problem, X):
    if X.n != problem.n:
        raise DimensionError(f"state has {X.n} rows, problem has {problem.n}")


def riccati_rhs(problem, X, tol_rel=DEFAULT_TOL):
    """Factored ``F(X) = A X + X A^T + Q - X G X``, compressed.

    Basis ``[C^T, A L, L]`` with core

        [[I_p, 0,  0            ],
         [0,   0,  D            ],
         [0,   D,  -(D L^T B)(D L^T B)^T]]
    """
    _check(problem, X)
    p = problem.C.shape[0]
    r = X.rank
    L, D = X.L, X.D
    basis = np.hstack([problem.C.T, problem.A @ L, L])
    core = np.zeros((p + 2 * r, p + 2 * r))
    core[:p, :p] = np.eye(p)
    if r:
        DLB = D @ (L.T @ problem.B)
        core[p:p + r, p + r:] = D
        core[p + r:, p:p + r] = D
        core[p + r:, p + r:] = -DLB @ DLB.T
    return compress(LowRankSym(basis, core), tol_rel)


def stage_difference(X_n, X_nj, B, tol_rel=DEFAULT_TOL):
    """``-K G K`` with ``K = X_nj - X_n``, from ``U = [L_n, L_nj]``.

    With ``T = blkdiag(-D_n, D_nj)`` the core is ``-(T U^T B)(T U^T B)^T``,
    negative semidefinite by construction.
    """
    if X_n.n != X_nj.n:
        raise DimensionError(f"stage has {X_nj.n} rows, state has {X_n.n}")
    B = np.asarray(B, dtype=float).reshape(X_n.n, -1)
    U = np.hstack([X_n.L, X_nj.L])
    if U.shape[1] == 0:
        return LowRankSym.zeros(X_n.n)
    # K = U T U^T lives in span(U); orthogonalize first so the product is not
    # formed from two nearly cancelling halves.
    K = compress(LowRankSym(U, _blkdiag(-X_n.D, X_nj.D)), 0.0)
    if K.rank == 0:
        return LowRankSym.zeros(X_n.n)
    TUB = K.D @ (K.L.T @ B)
    return compress(LowRankSym(K.L, -TUB @ TUB.T), tol_rel)


def _blkdiag(P, R):
    out = np.zeros((P.shape[0] + R.shape[0],) * 2)
    out[:P.shape[0], :P.shape[0]] = P
    out[P.shape[0]:, P.shape[0]:] = R
    return out


def fgf_norm(problem, X, tol_rel=DEFAULT_TOL):
    """``||F(X) G F(X)||_F`` from the factors of ``F(X)``."""
    F = riccati_rhs(problem, X, tol_rel)
    if F.rank == 0:
        return 0.0
    P = F.D @ (F.L.T @ problem.B)
    return fro_norm(LowRankSym(F.L, P @ P.T, orthonormal=F.orthonormal))
