"""Dense brute-force references for small problems.

Nothing here is used by the solver itself; these routines exist to check it.
"""

import numpy as np
import scipy.linalg as spla
from scipy.integrate import solve_ivp

from .errors import OracleCapError, OracleError

DENSE_CAP = 64
KRON_CAP = 32


def _check_cap(n, cap):
    if n > cap:
        raise OracleCapError(f"dense oracle limited to N <= {cap}, got N = {n}")


def _dense(X):
    X = X.to_dense() if hasattr(X, 'to_dense') else np.asarray(X, dtype=float)
    return 0.5 * (X + X.T)


def _coefficients(problem):
    A = problem.A.toarray()
    Q = problem.C.T @ problem.C
    G = problem.B @ problem.B.T
    return A, Q, G


def dense_rhs(problem, X, cap=DENSE_CAP):
    """``A X + X A^T + Q - X G X`` with everything formed explicitly."""
    _check_cap(problem.n, cap)
    A, Q, G = _coefficients(problem)
    X = _dense(X)
    return A @ X + X @ A.T + Q - X @ G @ X


def dense_solve(problem, t_end, rtol=1e-12, X0=None, cap=DENSE_CAP):
    """``X(t_end)`` from an 8(5,3) Dormand-Prince integration of the
    vectorized equation.

    ``X0`` overrides the problem's initial value.
    """
    _check_cap(problem.n, cap)
    n = problem.n
    A, Q, G = _coefficients(problem)
    X0 = _dense(problem.X0 if X0 is None else X0)
    if t_end == 0:
        return X0

    def f(t, y):
        X = y.reshape(n, n)
        AX = A @ X
        return (AX + AX.T + Q - X @ G @ X).ravel()

    scale = max(np.abs(X0).max(), np.abs(Q).max(), np.finfo(float).tiny)
    sol = solve_ivp(f, (0.0, t_end), X0.ravel(), method='DOP853',
                    rtol=rtol, atol=1e-5 * rtol * scale)
    if not sol.success:
        raise OracleError(
            f"reference integration failed ({sol.message}); "
            "try a smaller t_end or a smaller problem")
    return _dense(sol.y[:, -1].reshape(n, n))


def lyapunov_kron(A):
    """Matrix of ``X -> A X + X A^T`` acting on column-major ``vec(X)``."""
    n = A.shape[0]
    I = np.eye(n)
    return np.kron(I, A) + np.kron(A, I)


def dense_phi_lyap_all(A_n, h, M, kmax, cap=KRON_CAP):
    """``[phi_0(h Lyap)[M], ..., phi_kmax(h Lyap)[M]]`` from one expm.

    The Kronecker matrix is augmented with a nilpotent shift block so a
    single scaling-and-squaring Pade exponential yields every order.
    """
    A_n = np.asarray(A_n, dtype=float)
    n = A_n.shape[0]
    _check_cap(n, cap)
    m = n * n
    v = np.asarray(M, dtype=float).reshape(-1, order='F')
    big = np.zeros((m + kmax, m + kmax))
    big[:m, :m] = h * lyapunov_kron(A_n)
    if kmax:
        big[:m, m] = v
        for j in range(kmax - 1):
            big[m + j, m + j + 1] = 1.0
    E = spla.expm(big)
    out = [E[:m, :m] @ v]
    out += [E[:m, m + j] for j in range(kmax)]
    return [_dense(y.reshape(n, n, order='F')) for y in out]


def dense_phi_lyap(A_n, h, k, M, cap=KRON_CAP):
    """``phi_k(h Lyap)[M]`` with ``Lyap[X] = A_n X + X A_n^T``, densely."""
    return dense_phi_lyap_all(A_n, h, M, k, cap)[k]


def steady_state(problem, tol=1e-10, t_first=1.0, max_doublings=12, cap=DENSE_CAP,
                 history=None):
    """Equilibrium candidate by integrating to ever longer horizons.

    Stops once ``||F(X)||_F <= tol ||X||_F``. When ``history`` is a list the
    relative residual after each horizon is appended to it.
    """
    X = _dense(problem.X0)
    t_prev, t = 0.0, t_first
    for _ in range(max_doublings + 1):
        X = dense_solve(problem, t - t_prev, X0=X, cap=cap)
        res = np.linalg.norm(dense_rhs(problem, X, cap)) / max(np.linalg.norm(X), np.finfo(float).tiny)
        if history is not None:
            history.append(res)
        if res <= tol:
            return X
        t_prev, t = t, 2.0 * t
    raise OracleError(f"no steady state within horizon {t_prev} (residual {res:.3e})")
