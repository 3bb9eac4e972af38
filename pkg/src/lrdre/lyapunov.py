"""Closed-loop operator, Krylov exponential actions and Lyapunov phi-functions.

For the state ``X_n = L_n D_n L_n^T`` the linearized Riccati field is the
Lyapunov operator ``Lyap[X] = A_n X + X A_n^T`` with ``A_n = A - X_n B B^T``.
``phi_k(h Lyap)[M]`` is evaluated for factored ``M = L_M D_M L_M^T`` from the
integral representation

    phi_k(h Lyap)[M] = int_0^1 e^{s h A_n} M e^{s h A_n^T} (1 - s)^(k-1) / (k-1)! ds,

with Gauss-Legendre panels in ``s`` and Arnoldi approximations of
``e^{s h A_n} L_M``.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sp

from .errors import DimensionError, KrylovError
from .lowrank import DEFAULT_TOL, LowRankSym, compress

MAX_PHI_ORDER = 4

# first quadrature panel covers s*mu <= _PANEL_SPAN, later panels double
_PANEL_SPAN = 4.0
# smallest Krylov substep, relative to the requested time
_MIN_SUBSTEP = 2.0 ** -40
_CHECK_DIMS = (4, 8, 12, 16, 20, 24, 32, 40, 48, 56)


@dataclass(frozen=True)
class KrylovConfig:
    """Tuning knobs for exponential actions and phi quadrature."""

    max_basis: int = 60
    action_tol: float = 1e-10
    quad_nodes: int = 12

    def __post_init__(self):
        if self.max_basis < 2:
            raise ValueError("max_basis must be at least 2")
        if not self.action_tol > 0:
            raise ValueError("action_tol must be positive")
        if self.quad_nodes < 2:
            raise ValueError("quad_nodes must be at least 2")


class ClosedLoopOperator:
    """Implicit ``A_n = A - X_n G`` with ``G = B B^T``.

    ``A_n`` is never formed; products cost one sparse multiply plus a rank
    ``r_n``/``q`` correction through the cached block ``W = D_n L_n^T B``.
    """

    def __init__(self, A, B, X=None):
        self.A = sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        self.B = np.asarray(B, dtype=float).reshape(n, -1)
        if X is None or X.rank == 0:
            self.L = np.zeros((n, 0))
            self.W = np.zeros((0, self.B.shape[1]))
        else:
            if X.n != n:
                raise DimensionError(f"state has {X.n} rows, operator has {n}")
            self.L = X.L
            self.W = X.D @ (X.L.T @ self.B)

    @property
    def n(self):
        return self.A.shape[0]

    def matvec(self, V):
        V = np.asarray(V, dtype=float)
        if V.shape[0] != self.n:
            raise DimensionError(f"block has {V.shape[0]} rows, operator has {self.n}")
        out = self.A @ V
        if self.L.shape[1]:
            out = out - self.L @ (self.W @ (self.B.T @ V))
        return out

    def to_dense(self):
        return self.A.toarray() - self.L @ self.W @ self.B.T

    def norm_estimate(self):
        """Cheap upper-ish bound on ``||A_n||`` used to size quadrature panels."""
        a = abs(self.A).sum(axis=0).max() if self.A.nnz else 0.0
        if self.L.shape[1]:
            a += np.linalg.norm(self.L @ self.W) * np.linalg.norm(self.B)
        return float(a)


def matvec(op, V):
    return op.matvec(V)


def _arnoldi_error(H, m, hnext, tau):
    """``tau * h_{m+1,m} * |e_m^T phi_1(tau H) e_1|`` via an augmented expm."""
    aug = np.zeros((m + 1, m + 1))
    aug[:m, :m] = tau * H[:m, :m]
    aug[0, m] = 1.0
    phi1 = spla.expm(aug)[:m, m]
    return tau * hnext * abs(phi1[m - 1])


def _expm_times(matvec, v, times, tol, max_basis):
    """``e^{t A} v`` at each of the sorted nonnegative ``times``.

    Arnoldi with time substepping: each Krylov basis is reused for every
    requested time inside the substep it certifies.
    """
    n = v.shape[0]
    out = np.empty((len(times), n))
    t_final = times[-1] if len(times) else 0.0
    t_cur = 0.0
    w = v.copy()
    i = 0
    while i < len(times) and times[i] <= 0.0:
        out[i] = w
        i += 1

    while i < len(times):
        beta = np.linalg.norm(w)
        if beta == 0.0:
            out[i:] = 0.0
            break
        remaining = t_final - t_cur
        m_cap = min(max_basis, n)
        V = np.zeros((n, m_cap + 1))
        H = np.zeros((m_cap + 1, m_cap))
        V[:, 0] = w / beta
        m = 0
        happy = False
        ok = False
        err = np.inf
        for j in range(m_cap):
            p = matvec(V[:, j])
            h = V[:, :j + 1].T @ p
            p = p - V[:, :j + 1] @ h
            h2 = V[:, :j + 1].T @ p
            p = p - V[:, :j + 1] @ h2
            H[:j + 1, j] = h + h2
            hn = np.linalg.norm(p)
            m = j + 1
            if hn <= 1e-13 * max(1.0, np.linalg.norm(H[:m, :m])):
                happy = True
                break
            H[j + 1, j] = hn
            V[:, j + 1] = p / hn
            if m in _CHECK_DIMS:
                err = _arnoldi_error(H, m, hn, remaining)
                if err <= tol * remaining / t_final:
                    ok = True
                    break

        tau = remaining
        if happy:
            err = 0.0
        elif not ok:
            hn = H[m, m - 1]
            err = _arnoldi_error(H, m, hn, tau)
            while err > tol * tau / t_final:
                tau *= 0.5
                if tau < _MIN_SUBSTEP * t_final:
                    raise KrylovError(
                        "Arnoldi exponential action did not converge", err)
                err = _arnoldi_error(H, m, hn, tau)
        t_next = t_final if tau == remaining else t_cur + tau

        Hm = H[:m, :m]
        Vm = V[:, :m]
        j_end = i
        while j_end < len(times) and times[j_end] <= t_next:
            j_end += 1
        dts = np.asarray(times[i:j_end]) - t_cur
        if dts.size == 0 or dts[-1] != t_next - t_cur:
            dts = np.append(dts, t_next - t_cur)
        E = spla.expm(dts[:, None, None] * Hm[None, :, :])[:, :, 0]
        Y = beta * (E @ Vm.T)
        out[i:j_end] = Y[:j_end - i]
        w = Y[-1]
        t_cur = t_next
        i = j_end
    return out


def expm_action_times(op, times, V, cfg=KrylovConfig()):
    """``e^{t A_n} V`` for every ``t`` in ``times``; shape ``(len(times), N, k)``."""
    times = np.asarray(times, dtype=float)
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, np.newaxis]
    if V.shape[0] != op.n:
        raise DimensionError(f"block has {V.shape[0]} rows, operator has {op.n}")
    if np.any(~np.isfinite(times)) or np.any(times < 0):
        raise ValueError("times must be finite and nonnegative")
    order = np.argsort(times, kind='stable')
    sorted_t = times[order]
    out = np.empty((len(times), op.n, V.shape[1]))
    for c in range(V.shape[1]):
        cols = _expm_times(op.matvec, V[:, c], sorted_t, cfg.action_tol, cfg.max_basis)
        out[order, :, c] = cols
    return out


def expm_action(op, t, V, cfg=KrylovConfig()):
    """``e^{t A_n} V`` by Arnoldi with substepping; exact for ``t == 0``."""
    V = np.asarray(V, dtype=float)
    if t == 0:
        return V.copy()
    squeeze = V.ndim == 1
    Y = expm_action_times(op, [t], V, cfg)[0]
    return Y[:, 0] if squeeze else Y


def phi_scalar(k, z):
    """Scalar ``phi_k(z)``; series near zero, recurrence elsewhere."""
    z = complex(z) if isinstance(z, complex) else float(z)
    if abs(z) < 1.0:
        total, term = 0.0, 1.0 / factorial(k)
        j = 0
        while True:
            total += term
            j += 1
            term = term * z / (j + k)
            if abs(term) < 1e-18 * max(abs(total), 1e-300):
                return total + term
    val = np.exp(z)
    for j in range(k):
        val = (val - 1.0 / factorial(j)) / z
    return val


def quadrature_panels(mu, nodes):
    """Gauss-Legendre nodes/weights on [0, 1] graded toward ``s = 0``.

    ``mu`` bounds the decay/oscillation rate of the integrand in ``s``. For
    ``mu <= 4`` this is a single ``nodes``-point rule.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = [0.0]
    a = _PANEL_SPAN / mu if mu > _PANEL_SPAN else 1.0
    while a < 1.0:
        edges.append(a)
        a *= 2.0
    edges.append(1.0)
    s, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        s.append(lo + half * (x + 1.0))
        ws.append(half * w)
    return np.concatenate(s), np.concatenate(ws)


def phi_lyap(op, h, k, M, cfg=KrylovConfig(), tol_rel=DEFAULT_TOL):
    """Factored ``phi_k(h Lyap_n)[M]`` for ``k = 0..4``.

    ``k = 0`` is a single exponential action on the basis of ``M``; ``k >= 1``
    is quadrature of the integral form over ``e^{s h A_n} L_M`` and a final
    compression at ``tol_rel``.
    """
    if not 0 <= k <= MAX_PHI_ORDER:
        raise ValueError(f"phi order must be in 0..{MAX_PHI_ORDER}, got {k}")
    if M.n != op.n:
        raise DimensionError(f"matrix has {M.n} rows, operator has {op.n}")
    if not h >= 0:
        raise ValueError("step must be nonnegative")
    if M.rank == 0:
        return LowRankSym.zeros(op.n)
    if h == 0:
        return compress(M.scaled(1.0 / factorial(k)), tol_rel)
    if k == 0:
        Y = expm_action(op, h, M.L, cfg)
        return compress(LowRankSym(Y, M.D), tol_rel)

    mu = 2.0 * abs(h) * op.norm_estimate()
    s, w = quadrature_panels(mu, cfg.quad_nodes)
    coef = w * (1.0 - s) ** (k - 1) / factorial(k - 1)
    Y = expm_action_times(op, h * s, M.L, cfg)
    L = np.concatenate(list(Y), axis=1)
    D = np.kron(np.diag(coef), M.D)
    return compress(LowRankSym(L, D), tol_rel)
