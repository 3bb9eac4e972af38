"""Benchmark Riccati problems and file ingestion.

Random factors come from numpy's PCG64 bit generator, which produces the same
stream on every platform for a given seed.
"""

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .lowrank import LowRankSym
from .rhs import RiccatiProblem


@dataclass(frozen=True)
class GridSpec:
    """``n0`` interior points per direction on the unit square."""

    n0: int

    def __post_init__(self):
        if self.n0 < 2:
            raise ValueError(f"n0 must be at least 2, got {self.n0}")

    @property
    def N(self):
        return self.n0 * self.n0

    @property
    def spacing(self):
        return 1.0 / (self.n0 + 1)


def rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def random_initial_factor(N, r, seed=0, mode='gaussian'):
    """Seeded ``X0 = L0 L0^T`` with ``L0`` of shape ``(N, r)``.

    ``mode='gaussian'`` draws standard normal entries; ``mode='sin'`` uses
    ``sin(z)`` with ``z`` uniform on ``[0, 2 pi]``. ``r = 0`` gives the zero
    matrix.
    """
    if r < 0:
        raise ValueError("rank must be nonnegative")
    if r == 0:
        return LowRankSym.zeros(N)
    g = rng(seed)
    if mode == 'gaussian':
        L0 = g.standard_normal((N, r))
    elif mode == 'sin':
        L0 = np.sin(g.uniform(0.0, 2.0 * np.pi, size=(N, r)))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return LowRankSym.from_factor(L0)


def advection_diffusion_matrix(spec):
    """Finite differences for ``Lap u - 10 x u_x - 100 y u_y``, Dirichlet BCs.

    Unknowns are ordered with ``x`` fastest: ``k = (j - 1) n0 + (i - 1)`` for
    the point ``(i dx, j dx)``. Five-point Laplacian, central differences for
    the advection terms.
    """
    n0, d = spec.n0, spec.spacing
    pts = np.arange(1, n0 + 1) * d
    e = np.ones(n0)
    D2 = sp.diags([e[:-1], -2.0 * e, e[:-1]], [-1, 0, 1]) / d ** 2
    D1 = sp.diags([-e[:-1], e[:-1]], [-1, 1]) / (2.0 * d)
    I = sp.identity(n0)
    Ax = D2 - 10.0 * sp.diags(pts) @ D1
    Ay = D2 - 100.0 * sp.diags(pts) @ D1
    A = (sp.kron(I, Ax, format='csr') + sp.kron(Ay, I, format='csr')).tocsr()
    A.eliminate_zeros()
    return A


def advection_diffusion(spec, seed=0, rank=1):
    """Advection-diffusion Riccati benchmark on an ``n0 x n0`` grid.

    ``B`` and ``C^T`` are the normalized all-ones vector (one input, one
    output); ``X0 = L0 L0^T`` with a seeded Gaussian ``L0`` of ``rank`` columns.
    """
    if isinstance(spec, int):
        spec = GridSpec(spec)
    A = advection_diffusion_matrix(spec)
    N = spec.N
    ones = np.ones((N, 1)) / np.sqrt(N)
    X0 = random_initial_factor(N, rank, seed)
    return RiccatiProblem(A, ones.T.copy(), ones, X0)


def load_generalized(E_diag, A_hat, B_hat, C_hat, X0=None):
    """Standard form of ``E x' = A x + B u`` for diagonal positive ``E``.

    Returns the problem with ``A = E^{-1/2} A_hat E^{-1/2}``,
    ``B = E^{-1/2} B_hat`` and ``C = C_hat E^{-1/2}``, scaling rows and columns
    of the sparse ``A_hat`` in place of any dense product.
    """
    E = np.asarray(E_diag, dtype=float).ravel()
    bad = np.flatnonzero(~(E > 0))
    if bad.size:
        raise ValueError(f"E must be positive; entry {bad[0]} is {E[bad[0]]}")
    s = 1.0 / np.sqrt(E)
    S = sp.diags(s)
    A = (S @ sp.csr_matrix(A_hat) @ S).tocsr()
    B = s[:, np.newaxis] * np.asarray(B_hat, dtype=float).reshape(E.size, -1)
    C = np.atleast_2d(np.asarray(C_hat, dtype=float)) * s[np.newaxis, :]
    if X0 is None:
        X0 = LowRankSym.zeros(E.size)
    return RiccatiProblem(A, C, B, X0)


def read_matrix_market(path):
    """Sparse matrix from a Matrix Market coordinate file."""
    return sp.csr_matrix(scipy.io.mmread(str(path)))


def read_csv_block(path):
    """Headerless, comma-separated, row-major dense block (at least 2-D)."""
    return np.loadtxt(str(path), delimiter=',', ndmin=2)


def load_generalized_files(a_path, b_path, c_path, e_path=None, X0=None):
    """:func:`load_generalized` from a ``.mtx`` A and CSV B, C, E files.

    A missing ``e_path`` means ``E = I``. ``B`` is ``N x q``, ``C`` is ``p x N``
    and ``E`` is a single row or column of ``N`` values.
    """
    A_hat = read_matrix_market(a_path)
    B_hat = read_csv_block(b_path)
    C_hat = read_csv_block(c_path)
    N = A_hat.shape[0]
    E = read_csv_block(e_path).ravel() if e_path else np.ones(N)
    return load_generalized(E, A_hat, B_hat, C_hat, X0)


def random_closed_loop(N, seed=0, q=2, state_rank=2, rhs_rank=3):
    """Seeded test instance: a closed-loop operator and an indefinite ``M``.

    ``A`` is a sparse random perturbation of ``-2 I``; the state and ``B`` are
    scaled so ``A_n`` keeps a moderate norm.
    """
    from .lyapunov import ClosedLoopOperator

    g = rng(seed)
    density = min(1.0, 5.0 / N)
    P = sp.random(N, N, density=density, random_state=g, data_rvs=g.standard_normal)
    A = (-2.0 * sp.identity(N) + 2.0 * P).tocsr()
    B = g.standard_normal((N, q)) / np.sqrt(N)
    X = LowRankSym.from_factor(g.standard_normal((N, state_rank)) / np.sqrt(N))
    M = LowRankSym(g.standard_normal((N, rhs_rank)),
                   np.diag(g.uniform(-1.0, 1.0, rhs_rank)))
    return ClosedLoopOperator(A, B, X), M
