"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""

import time

import numpy as np
import pytest

import conftest
from lrdre import cli
from lrdre.adaptivity import (ControllerConfig, initial_step, next_step_accept, retry_step_reject,
                              solve_adaptive)
from lrdre.integrators import EMBEDDED, STEPPERS
from lrdre.lowrank import LowRankSym, fro_norm
from lrdre.oracle import dense_rhs, steady_state
from lrdre.problems import advection_diffusion, rng
from lrdre.rhs import RiccatiProblem, fgf_norm

from conftest import random_lowrank, random_problem

TOLS = (1e-3, 1e-4, 1e-5)


def report(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}: {detail}"
    conftest.ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def test_phi_kernel_oracle_equivalence():
    t0 = time.perf_counter()
    errs = cli.phitest_errors(25, list(range(5)), 20, seed=0, hs=(0.01, 0.1))
    wall = time.perf_counter() - t0
    worst = max(errs)
    report(1, "phi kernel vs Kronecker oracle", worst <= 1e-8 and wall <= 60 and len(errs) == 200,
           f"max rel err {worst:.2e} over {len(errs)} cases in {wall:.1f}s")


def test_convergence_orders():
    t0 = time.perf_counter()
    cases = [('exprb2', [16, 32, 64, 128], 2, 0.3),
             ('exprb3', [16, 32, 64, 128], 3, 0.4),
             ('exprb32', [16, 32, 64, 128], 3, 0.4),
             ('exprb43', [8, 16, 32, 64], 4, 0.5)]
    slopes, ok = {}, True
    for method, ns, order, band in cases:
        spec = cli.RunSpec(method=method, n0=8, t_end=0.1, seed=0)
        rows = cli.convergence_table(spec, ns, oracle_rtol=1e-12)
        slopes[method] = cli.fitted_slope(*zip(*rows))
        ok &= abs(slopes[method] - order) <= band
    wall = time.perf_counter() - t0
    detail = ', '.join(f"{m} {s:.2f}" for m, s in slopes.items())
    report(2, "fixed-step convergence orders", ok and wall <= 300, f"slopes {detail}; {wall:.0f}s")


def test_tolerance_tracking():
    t0 = time.perf_counter()
    ok, parts = True, []
    for method in EMBEDDED:
        spec = cli.RunSpec(method=method, n0=8, t_end=0.002, seed=0)
        rows = cli.tolerance_table(spec, TOLS, oracle_rtol=1e-12)
        for tol, _, _, err in rows:
            ok &= 1e-2 * tol <= err <= 50 * tol
        mono = cli.monotone_in_tol(rows)
        ok &= mono
        ratios = '/'.join(f"{r[3] / r[0]:.1e}" for r in rows)
        parts.append(f"{method} err/tol {ratios}{'' if mono else ' (not monotone)'}")
    wall = time.perf_counter() - t0
    report(3, "adaptive error tracks tolerance", ok and wall <= 300, '; '.join(parts) + f"; {wall:.0f}s")


def test_transient_step_sizes(bench):
    ok, parts = True, []
    for method in EMBEDDED:
        traj = solve_adaptive(bench, method, ControllerConfig(atol=1e-5, rtol=1e-5), 0.1)
        t = np.array(traj.times)
        first = int(np.sum(t <= 0.05))
        second = len(t) - first
        growth = traj.steps[-1] / traj.h0
        ok &= first > second and growth >= 4
        parts.append(f"{method} steps {first}/{second}, h_final/h0 {growth:.1f}")
    report(4, "step sizes grow through the transient", ok, '; '.join(parts))


def test_equilibrium_preservation(small_bench):
    Xd = steady_state(small_bench)
    resid = np.linalg.norm(dense_rhs(small_bench, Xd)) / np.linalg.norm(Xd)
    Xs = LowRankSym.from_dense(Xd)
    pb = small_bench.with_initial(Xs)
    devs = {}
    for method, step in STEPPERS.items():
        X = step(pb, Xs, 0.01).X_next.to_dense()
        devs[method] = np.linalg.norm(X - Xd) / np.linalg.norm(Xd)
    counts = {m: len(solve_adaptive(pb, m, ControllerConfig(), 0.1).times) for m in EMBEDDED}
    ok = resid <= 1e-8 and max(devs.values()) <= 1e-7 and max(counts.values()) <= 3
    report(5, "equilibrium preserved", ok,
           f"ARE residual {resid:.1e}, max step deviation {max(devs.values()):.1e}, "
           f"adaptive steps {counts}")


def test_low_rank_norm_trick():
    g = rng(2024)
    worst = 0.0
    for i in range(100):
        N = int(g.integers(2, 101))
        r = int(g.integers(1, min(N, 12) + 1))
        X = random_lowrank(g, N, r, orthonormal=(i % 4 == 0))
        dense = np.linalg.norm(X.to_dense())
        worst = max(worst, abs(fro_norm(X) - dense) / dense)
        if X.orthonormal:
            worst = max(worst, abs(np.linalg.norm(X.D) - dense) / dense)
    report(6, "factored Frobenius norm", worst <= 1e-10, f"max rel deviation {worst:.1e} over 100 matrices")


def test_controller_arithmetic():
    g = rng(7)
    cfg = ControllerConfig()
    branches = {'cap': 0, 'sigma1': 0, 'floor': 0, 'sigma2': 0}
    mismatches = 0
    for _ in range(1000):
        h = float(g.uniform(1e-6, 1e-1))
        tol = float(10 ** g.uniform(-10, -2))
        p = int(g.integers(2, 4))
        err = tol * float(10 ** g.uniform(-6, 6))
        if err <= tol:
            fac = 0.9 * (tol / err) ** (1.0 / (p + 1))
            branches['cap' if fac > 1.5 else 'sigma1'] += 1
            mismatches += next_step_accept(h, err, tol, p, cfg) != min(1.5, fac) * h
        else:
            fac = 0.5 * (tol / err) ** (1.0 / (p + 1))
            branches['floor' if fac < 0.1 else 'sigma2'] += 1
            mismatches += retry_step_reject(h, err, tol, p, cfg) != max(0.1, fac) * h
    for i in range(50):
        pb = random_problem(8, seed=i)
        atol, rtol = 10 ** g.uniform(-8, -3), 10 ** g.uniform(-8, -3)
        c = ControllerConfig(atol=atol, rtol=rtol)
        p = 2 + i % 2
        want = 0.1 * ((atol + fro_norm(pb.X0) * rtol) / fgf_norm(pb, pb.X0)) ** (1.0 / (p + 1))
        mismatches += initial_step(pb, pb.X0, c, p) != want
    ok = mismatches == 0 and min(branches.values()) > 0
    report(7, "controller formulas", ok, f"{mismatches} mismatches; branch counts {branches}")


def test_pair_consistency():
    worst = 0.0
    for seed in range(20):
        pb = random_problem(20, seed=100 + seed)
        for method in EMBEDDED:
            r = STEPPERS[method](pb, pb.X0, 0.05)
            diff = r.X_next.to_dense() - r.X_embedded.to_dense()
            dev = np.linalg.norm(diff - r.error_est.to_dense()) / np.linalg.norm(r.X_next.to_dense())
            worst = max(worst, dev)
    report(8, "embedded pair consistency", worst <= 1e-12, f"max rel deviation {worst:.1e} over 40 steps")


def test_determinism(tmp_path):
    outs = []
    for i in range(2):
        spec = cli.RunSpec(method='exprb32', n0=8, t_end=0.1, seed=11, atol=1e-5, rtol=1e-5,
                           out=str(tmp_path / f'run{i}.csv'))
        assert cli.cmd_solve(spec) == 0
        outs.append((tmp_path / f'run{i}.csv').read_bytes())
    report(9, "byte-identical reruns", outs[0] == outs[1] and len(outs[0]) > 0,
           f"{len(outs[0])} bytes, identical={outs[0] == outs[1]}")
