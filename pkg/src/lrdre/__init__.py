"""Adaptive low-rank exponential Rosenbrock integrators for differential
Riccati equations ``X' = A X + X A^T + C^T C - X B B^T X``."""

from .adaptivity import (ControllerConfig, Trajectory, initial_step, next_step_accept,
                         retry_step_reject, solve_adaptive, solve_fixed, tolerance)
from .errors import (DimensionError, KrylovError, LrdreError, OracleCapError, OracleError,
                     StepSizeError)
from .integrators import (EMBEDDED, ORDERS, STEPPERS, StepConfig, StepResult, step_exprb3,
                          step_exprb32, step_exprb43, step_exprb_euler)
from .lowrank import LowRankSym, assemble, compress, fro_norm
from .lyapunov import ClosedLoopOperator, KrylovConfig, expm_action, phi_lyap, phi_scalar
from .problems import GridSpec, advection_diffusion, load_generalized, load_generalized_files
from .rhs import RiccatiProblem, fgf_norm, riccati_rhs, stage_difference

__version__ = '0.1.0'
