import numpy as np
import pytest
import scipy.sparse as sp

from lrdre.integrators import (EMBEDDED, ORDERS, STEPPERS, StepConfig, step_exprb3,
                               step_exprb32, step_exprb43, step_exprb_euler)
from lrdre.lowrank import LowRankSym, assemble, compress, fro_norm
from lrdre.lyapunov import ClosedLoopOperator, phi_lyap
from lrdre.oracle import dense_solve, steady_state
from lrdre.rhs import RiccatiProblem, riccati_rhs

from conftest import random_problem, rel

TIGHT = StepConfig(tol_rel=1e-14)


@pytest.fixture(scope='module')
def equilibrium(small_bench):
    Xs = LowRankSym.from_dense(steady_state(small_bench))
    return small_bench.with_initial(Xs), Xs


@pytest.mark.parametrize('method', list(STEPPERS))
def test_equilibrium_preserved(method, equilibrium):
    pb, Xs = equilibrium
    h = 0.01
    eps = fro_norm(riccati_rhs(pb, Xs))
    res = STEPPERS[method](pb, Xs, h)
    dev = np.linalg.norm(res.X_next.to_dense() - Xs.to_dense())
    assert dev <= 10 * h * eps + 1e-12 * fro_norm(Xs)
    if res.error_est is not None:
        assert fro_norm(res.error_est) <= 1e-10 * fro_norm(Xs)


def test_scalar_linear_exact():
    pb = RiccatiProblem(sp.csr_matrix([[-1.0]]), [[0.0]], [[0.0]], LowRankSym.from_factor([[1.0]]))
    for h in (0.01, 0.5, 2.0):
        x = step_exprb_euler(pb, pb.X0, h).X_next.to_dense()[0, 0]
        assert x == pytest.approx(np.exp(-2 * h), rel=1e-12)


def linear_problem(N=15, seed=2):
    pb = random_problem(N, seed=seed)
    return RiccatiProblem(pb.A, pb.C, np.zeros((N, 1)), pb.X0)


def test_linear_problem_pairs_agree():
    pb = linear_problem()
    h = 0.05
    euler = step_exprb_euler(pb, pb.X0, h).X_next.to_dense()
    r32 = step_exprb32(pb, pb.X0, h)
    assert r32.error_est.rank == 0
    np.testing.assert_allclose(r32.X_next.to_dense(), r32.X_embedded.to_dense(), atol=1e-14)
    np.testing.assert_allclose(step_exprb3(pb, pb.X0, h).X_next.to_dense(), euler, atol=1e-13)
    r43 = step_exprb43(pb, pb.X0, h)
    assert r43.error_est.rank == 0
    np.testing.assert_allclose(r43.X_next.to_dense(), euler, atol=1e-13)


def test_exprb3_is_exprb32_main():
    pb = random_problem(20, seed=6)
    a = step_exprb3(pb, pb.X0, 0.02).X_next
    b = step_exprb32(pb, pb.X0, 0.02).X_next
    np.testing.assert_array_equal(a.to_dense(), b.to_dense())
    assert step_exprb3(pb, pb.X0, 0.02).error_est is None


def test_exprb32_stage_structure():
    pb = random_problem(20, seed=7)
    h = 0.03
    r = step_exprb32(pb, pb.X0, h)
    op = ClosedLoopOperator(pb.A, pb.B, pb.X0)
    X2 = assemble([(1.0, pb.X0), (h, phi_lyap(op, h, 1, riccati_rhs(pb, pb.X0)))])
    np.testing.assert_allclose(r.X_embedded.to_dense(), X2.to_dense(), atol=1e-13)


@pytest.mark.parametrize('method', EMBEDDED)
@pytest.mark.parametrize('seed', range(4))
def test_pair_consistency(method, seed):
    pb = random_problem(20, seed=seed)
    r = STEPPERS[method](pb, pb.X0, 0.05)
    diff = r.X_next.to_dense() - r.X_embedded.to_dense()
    E = r.error_est.to_dense()
    # dense subtraction of two O(||X||) matrices limits the achievable accuracy
    assert np.linalg.norm(diff - E) <= 1e-12 * np.linalg.norm(r.X_next.to_dense())
    assert (r.order_main, r.order_embedded) == ORDERS[method]
    assert r.order_embedded <= r.order_main


@pytest.mark.parametrize('method,expected', [('exprb2', 3), ('exprb32', 4), ('exprb43', 5)])
def test_local_error_order(method, expected):
    pb = random_problem(20, seed=0)
    hs = np.array([0.04, 0.02, 0.01, 0.005])
    errs = []
    for h in hs:
        ref = dense_solve(pb, h, rtol=1e-13)
        errs.append(rel(STEPPERS[method](pb, pb.X0, h, TIGHT).X_next.to_dense(), ref))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - expected) <= 0.4, (errs, slope)


def _run(pb, method, n, T, embedded=False):
    X, h = pb.X0, T / n
    for _ in range(n):
        r = STEPPERS[method](pb, X, h, TIGHT)
        X = compress(r.X_embedded if embedded else r.X_next, TIGHT.tol_rel)
    return X


@pytest.mark.parametrize('method,ns,embedded,order,band', [
    ('exprb32', [16, 32, 64, 128], False, 3, 0.4),
    ('exprb32', [16, 32, 64, 128], True, 2, 0.3),
    ('exprb43', [8, 16, 32, 64], False, 4, 0.5),
    ('exprb43', [8, 16, 32, 64], True, 3, 0.4),
])
def test_global_order_random(method, ns, embedded, order, band):
    pb = random_problem(20, seed=0)
    ref = dense_solve(pb, 0.1, rtol=1e-13)
    errs = [rel(_run(pb, method, n, 0.1, embedded).to_dense(), ref) for n in ns]
    slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert abs(slope - order) <= band, (errs, slope)


def test_outputs_symmetric():
    pb = random_problem(12, seed=3)
    for step in STEPPERS.values():
        X = step(pb, pb.X0, 0.1).X_next
        np.testing.assert_array_equal(X.D, X.D.T)
