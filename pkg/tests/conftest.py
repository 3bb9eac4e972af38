import numpy as np
import pytest
import scipy.sparse as sp

from lrdre.lowrank import LowRankSym
from lrdre.problems import advection_diffusion, rng
from lrdre.rhs import RiccatiProblem


def random_lowrank(g, N, r, orthonormal=False):
    if orthonormal:
        Q, _ = np.linalg.qr(g.standard_normal((N, r)))
        return LowRankSym(Q, np.diag(g.uniform(-2, 2, r)), orthonormal=True)
    S = g.standard_normal((r, r))
    return LowRankSym(g.standard_normal((N, r)), S + S.T)


def random_problem(N=20, seed=0, p=1, q=2, r=2, scale_x=0.5):
    """Small mildly stiff Riccati problem with a PSD initial value."""
    g = rng(seed)
    P = sp.random(N, N, density=0.3, random_state=g, data_rvs=g.standard_normal)
    A = -3.0 * sp.identity(N) + P / np.sqrt(0.3 * N)
    C = g.standard_normal((p, N)) / np.sqrt(N)
    B = g.standard_normal((N, q)) / np.sqrt(N)
    X0 = LowRankSym.from_factor(scale_x * g.standard_normal((N, r)) / np.sqrt(N))
    return RiccatiProblem(A.tocsr(), C, B, X0)


def dense(X):
    return X.to_dense()


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture
def gen():
    return rng(12345)


@pytest.fixture(scope='session')
def bench():
    """The n0 = 8 advection-diffusion benchmark."""
    return advection_diffusion(8, seed=0)


@pytest.fixture(scope='session')
def small_bench():
    return advection_diffusion(4, seed=0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section('acceptance criteria')
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
