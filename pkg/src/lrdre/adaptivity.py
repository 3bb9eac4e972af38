"""Step-size control and the time-integration drivers."""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import StepSizeError
from .integrators import EMBEDDED, ORDERS, STEPPERS, StepConfig
from .lowrank import LowRankSym, compress, fro_norm
from .rhs import fgf_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControllerConfig:
    """Tolerances and controller constants.

    ``h_min``/``h_max`` left as ``None`` default to ``1e-12 * t_end`` and
    ``t_end`` inside the drivers.
    """

    atol: float = 1e-5
    rtol: float = 1e-5
    sigma1: float = 0.9
    sigma2: float = 0.5
    delta_max: float = 1.5
    delta_min: float = 0.1
    theta: float = 0.1
    h_min: Optional[float] = None
    h_max: Optional[float] = None
    max_rejects_per_step: int = 20

    def __post_init__(self):
        if self.atol < 0 or self.rtol < 0 or self.atol + self.rtol <= 0:
            raise ValueError("tolerances must be nonnegative and not both zero")
        if not 0 < self.delta_min < 1 < self.delta_max:
            raise ValueError("need 0 < delta_min < 1 < delta_max")
        if not 0 < self.sigma2 <= self.sigma1 < 1:
            raise ValueError("need 0 < sigma2 <= sigma1 < 1")
        if self.h_min is not None and self.h_max is not None and self.h_min > self.h_max:
            raise ValueError("h_min exceeds h_max")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.max_rejects_per_step < 0:
            raise ValueError("max_rejects_per_step must be nonnegative")

    def for_interval(self, t_end):
        return replace(self,
                       h_min=1e-12 * t_end if self.h_min is None else self.h_min,
                       h_max=t_end if self.h_max is None else self.h_max)

    def compression_tol(self):
        return min(1e-10, 0.01 * self.rtol) if self.rtol > 0 else 1e-10


def _clamp(h, cfg):
    if cfg.h_min is not None:
        h = max(h, cfg.h_min)
    if cfg.h_max is not None:
        h = min(h, cfg.h_max)
    return h


def tolerance(X_n, X_trial, cfg):
    """``Atol + max(||X_n||, ||X_trial||) * Rtol``."""
    return cfg.atol + max(fro_norm(X_n), fro_norm(X_trial)) * cfg.rtol


def next_step_accept(h_n, err, tol, p, cfg):
    """Step after an accepted one: ``min(delta_max, sigma1 (tol/err)^(1/(p+1))) h_n``."""
    if err == 0:
        factor = cfg.delta_max
    else:
        factor = min(cfg.delta_max, cfg.sigma1 * (tol / err) ** (1.0 / (p + 1)))
    return _clamp(factor * h_n, cfg)


def retry_step_reject(h_n, err, tol, p, cfg):
    """Retry size after a rejection: ``max(delta_min, sigma2 (tol/err)^(1/(p+1))) h_n``."""
    factor = max(cfg.delta_min, cfg.sigma2 * (tol / err) ** (1.0 / (p + 1)))
    return _clamp(factor * h_n, cfg)


def initial_step(problem, X0, cfg, p, tol_rel=None):
    """``theta (Tol / ||F(X0) G F(X0)||)^(1/(p+1))`` with ``Tol = Atol + ||X0|| Rtol``."""
    kw = {} if tol_rel is None else {'tol_rel': tol_rel}
    tol = cfg.atol + fro_norm(X0) * cfg.rtol
    g = fgf_norm(problem, X0, **kw)
    if g == 0:
        return cfg.h_max if cfg.h_max is not None else np.inf
    return _clamp(cfg.theta * (tol / g) ** (1.0 / (p + 1)), cfg)


@dataclass
class Trajectory:
    """Accepted steps of a run; index ``i`` describes the step ending at ``times[i]``."""

    method: str
    t_end: float
    times: List[float] = field(default_factory=list)
    steps: List[float] = field(default_factory=list)
    rejects: List[int] = field(default_factory=list)
    error_estimates: List[float] = field(default_factory=list)
    ranks: List[int] = field(default_factory=list)
    norms: List[float] = field(default_factory=list)
    final: Optional[LowRankSym] = None
    states: Optional[List[LowRankSym]] = None
    h0: Optional[float] = None

    def record(self, t, h, rejects, err, X):
        self.times.append(t)
        self.steps.append(h)
        self.rejects.append(rejects)
        self.error_estimates.append(err)
        self.ranks.append(X.rank)
        self.norms.append(fro_norm(X))
        self.final = X
        if self.states is not None:
            self.states.append(X)

    def rows(self):
        """``(t, h, error_estimate, rank, fro_norm, rejects)`` per accepted step."""
        return list(zip(self.times, self.steps, self.error_estimates,
                        self.ranks, self.norms, self.rejects))


def _step_config(step_cfg, tol_rel):
    if step_cfg is None:
        return StepConfig(tol_rel=tol_rel)
    return step_cfg


def solve_adaptive(problem, method, cfg, t_end, step_cfg=None, store_states=False):
    """Integrate to ``t_end`` with error-controlled steps of an embedded pair.

    Raises
    ------
    StepSizeError
        When the step falls below ``h_min`` or a step is rejected more than
        ``max_rejects_per_step`` times. ``trajectory`` carries the accepted
        prefix.
    """
    if method not in EMBEDDED:
        raise ValueError(f"adaptive stepping needs an embedded pair {EMBEDDED}, got {method!r}")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    cfg = cfg.for_interval(t_end)
    scfg = _step_config(step_cfg, cfg.compression_tol())
    step = STEPPERS[method]
    p = ORDERS[method][1]

    X = compress(problem.X0, scfg.tol_rel, scfg.rank_cap)
    traj = Trajectory(method, t_end, states=[] if store_states else None)
    h = initial_step(problem, X, cfg, p, scfg.tol_rel)
    traj.h0 = h
    t = 0.0
    while t < t_end:
        remaining = t_end - t
        final = h >= remaining * (1.0 - 1e-12)
        h_try = remaining if final else h
        rejects = 0
        while True:
            res = step(problem, X, h_try, scfg)
            X_new = compress(res.X_next, scfg.tol_rel, scfg.rank_cap)
            err = fro_norm(res.error_est)
            tol = tolerance(X, X_new, cfg)
            if err <= tol:
                break
            rejects += 1
            log.debug("reject t=%g h=%g err=%g tol=%g", t, h_try, err, tol)
            if rejects > cfg.max_rejects_per_step:
                raise StepSizeError(
                    f"{rejects} rejections at t = {t:.6g}", traj)
            if h_try <= cfg.h_min:
                raise StepSizeError(
                    f"step size fell below h_min = {cfg.h_min:.3g} at t = {t:.6g}", traj)
            h_try = retry_step_reject(h_try, err, tol, p, cfg)
            final = False
        t = t_end if final else t + h_try
        X = X_new
        traj.record(t, h_try, rejects, err, X)
        if not final:
            h = next_step_accept(h_try, err, tol, p, cfg)
    return traj


def solve_fixed(problem, method, n_steps, t_end, step_cfg=None, store_states=False):
    """``n_steps`` uniform steps of size ``t_end / n_steps``; no control."""
    if method not in STEPPERS:
        raise ValueError(f"unknown method {method!r}")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    scfg = step_cfg or StepConfig()
    step = STEPPERS[method]
    h = t_end / n_steps
    X = compress(problem.X0, scfg.tol_rel, scfg.rank_cap)
    traj = Trajectory(method, t_end, states=[] if store_states else None)
    traj.h0 = h
    for i in range(1, n_steps + 1):
        res = step(problem, X, h, scfg)
        X = compress(res.X_next, scfg.tol_rel, scfg.rank_cap)
        err = fro_norm(res.error_est) if res.error_est is not None else float('nan')
        traj.record(t_end if i == n_steps else i * h, h, 0, err, X)
    return traj
