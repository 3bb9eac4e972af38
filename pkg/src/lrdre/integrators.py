"""Low-rank exponential Rosenbrock steps.

All schemes share the first stage ``X_n + h phi_1(h Lyap_n)[F(X_n)]`` and
differ in how stage differences ``D_nj = -(X_nj - X_n) G (X_nj - X_n)`` enter
the output. ``X_next`` is returned as an uncompressed concatenation so that
``X_next - X_embedded`` equals the error estimate term by term; the drivers
compress it after acceptance.
"""

from dataclasses import dataclass, field
from typing import Optional

from .lowrank import DEFAULT_TOL, LowRankSym, assemble, compress
from .lyapunov import ClosedLoopOperator, KrylovConfig, phi_lyap
from .rhs import riccati_rhs, stage_difference


@dataclass(frozen=True)
class StepConfig:
    """Numerical settings shared by every stage of a step."""

    krylov: KrylovConfig = field(default_factory=KrylovConfig)
    tol_rel: float = DEFAULT_TOL
    rank_cap: Optional[int] = None


@dataclass(frozen=True, eq=False)
class StepResult:
    X_next: LowRankSym
    X_embedded: Optional[LowRankSym]
    error_est: Optional[LowRankSym]
    order_main: int
    order_embedded: Optional[int]


def _compress(X, cfg):
    return compress(X, cfg.tol_rel, cfg.rank_cap)


def _phi(op, h, k, M, cfg):
    return phi_lyap(op, h, k, M, cfg.krylov, cfg.tol_rel)


def _euler_stage(problem, X_n, h, cfg):
    op = ClosedLoopOperator(problem.A, problem.B, X_n)
    F = riccati_rhs(problem, X_n, cfg.tol_rel)
    return op, F, _phi(op, h, 1, F, cfg)


def step_exprb_euler(problem, X_n, h, cfg=StepConfig()):
    """Exponential Rosenbrock-Euler, order 2."""
    _, _, P1 = _euler_stage(problem, X_n, h, cfg)
    return StepResult(assemble([(1.0, X_n), (h, P1)]), None, None, 2, None)


def _exprb32_parts(problem, X_n, h, cfg):
    op, _, P1 = _euler_stage(problem, X_n, h, cfg)
    X2 = _compress(assemble([(1.0, X_n), (h, P1)]), cfg)
    D2 = stage_difference(X_n, X2, problem.B, cfg.tol_rel)
    E = _phi(op, h, 3, D2, cfg).scaled(2.0 * h)
    return X2, E


def step_exprb32(problem, X_n, h, cfg=StepConfig()):
    """Third-order scheme with the Rosenbrock-Euler stage as embedded solution."""
    X2, E = _exprb32_parts(problem, X_n, h, cfg)
    return StepResult(assemble([(1.0, X2), (1.0, E)]), X2, E, 3, 2)


def step_exprb3(problem, X_n, h, cfg=StepConfig()):
    """The third-order solution of :func:`step_exprb32` alone."""
    X2, E = _exprb32_parts(problem, X_n, h, cfg)
    return StepResult(assemble([(1.0, X2), (1.0, E)]), None, None, 3, None)


def step_exprb43(problem, X_n, h, cfg=StepConfig()):
    """Fourth-order scheme, nodes ``c = (1/2, 1)``, third-order embedding.

    Embedded weights ``(16 phi_3, -2 phi_3)``; main weights add
    ``(-48 phi_4, 12 phi_4)``. Each weight acts once on the combined stage
    differences, using linearity of ``phi_k`` in its argument.
    """
    op = ClosedLoopOperator(problem.A, problem.B, X_n)
    F = riccati_rhs(problem, X_n, cfg.tol_rel)
    X2 = _compress(assemble([(1.0, X_n), (0.5 * h, _phi(op, 0.5 * h, 1, F, cfg))]), cfg)
    X3 = _compress(assemble([(1.0, X_n), (h, _phi(op, h, 1, F, cfg))]), cfg)
    D2 = stage_difference(X_n, X2, problem.B, cfg.tol_rel)
    D3 = stage_difference(X_n, X3, problem.B, cfg.tol_rel)

    emb = _compress(assemble([(16.0, D2), (-2.0, D3)]), cfg)
    X_emb = _compress(assemble([(1.0, X3), (h, _phi(op, h, 3, emb, cfg))]), cfg)
    corr = _compress(assemble([(-48.0, D2), (12.0, D3)]), cfg)
    E = _phi(op, h, 4, corr, cfg).scaled(h)
    return StepResult(assemble([(1.0, X_emb), (1.0, E)]), X_emb, E, 4, 3)


STEPPERS = {
    'exprb2': step_exprb_euler,
    'exprb3': step_exprb3,
    'exprb32': step_exprb32,
    'exprb43': step_exprb43,
}

EMBEDDED = ('exprb32', 'exprb43')
ORDERS = {'exprb2': (2, None), 'exprb3': (3, None), 'exprb32': (3, 2), 'exprb43': (4, 3)}
