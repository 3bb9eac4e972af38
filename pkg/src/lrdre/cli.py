"""Command-line harness: single solves, convergence sweeps, tolerance studies
and phi-kernel self-tests.

Every subcommand accepts ``--config FILE``, a key-value file whose keys are the
long option names (``n0 = 8``, ``t-end = 0.1``, ...), optionally under a
``[lrdre]`` section header. Flags given on the command line override the file.

Exit status is 0 on success, 1 when the solver or a self-test fails and 2 for
invalid input.

CSV columns
-----------
solve
    ``t, h, error_estimate, rank, fro_norm, rejects``
convergence
    ``n_steps, relative_error``
tolstudy
    ``tol, steps, rejects, relative_error``
"""

import argparse
import configparser
import csv
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .adaptivity import ControllerConfig, solve_adaptive, solve_fixed
from .errors import LrdreError, OracleCapError, StepSizeError
from .integrators import EMBEDDED, STEPPERS
from .lowrank import LowRankSym
from .lyapunov import MAX_PHI_ORDER, phi_lyap
from .oracle import DENSE_CAP, KRON_CAP, dense_phi_lyap_all, dense_solve, steady_state
from .problems import (advection_diffusion, load_generalized_files, random_closed_loop,
                       random_initial_factor)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SOLVE_COLUMNS = ('t', 'h', 'error_estimate', 'rank', 'fro_norm', 'rejects')
CONVERGENCE_COLUMNS = ('n_steps', 'relative_error')
TOLSTUDY_COLUMNS = ('tol', 'steps', 'rejects', 'relative_error')

PHITEST_LIMIT = 1e-8
BUILTIN_PROBLEMS = ('adv-diff',)


class UsageError(Exception):
    """Invalid run specification; maps to exit status 2."""


@dataclass
class RunSpec:
    """Everything needed to reproduce one run.

    ``n_steps`` selects fixed stepping; otherwise the run is adaptive with
    ``atol``/``rtol``.
    """

    method: str
    t_end: float = 0.1
    problem: str = 'adv-diff'
    n0: int = 8
    files: dict = field(default_factory=dict)
    init: str = 'random'
    rank: int = 1
    seed: int = 0
    n_steps: Optional[int] = None
    atol: float = 1e-5
    rtol: float = 1e-5
    out: Optional[str] = None

    def validate(self):
        if self.method not in STEPPERS:
            raise UsageError(f"unknown method {self.method!r}; choose from {', '.join(STEPPERS)}")
        if self.problem == 'files':
            missing = [k for k in ('A', 'B', 'C') if not self.files.get(k)]
            if missing:
                raise UsageError(f"--problem files needs {', '.join('--' + k + '-file' for k in missing)}")
        elif self.problem not in BUILTIN_PROBLEMS:
            raise UsageError(f"unknown problem {self.problem!r}; use 'files' or one of {BUILTIN_PROBLEMS}")
        if self.init not in ('random', 'zero', 'steady'):
            raise UsageError(f"unknown init {self.init!r}")
        if not self.t_end > 0:
            raise UsageError("--t-end must be positive")
        if self.n_steps is None:
            if self.method not in EMBEDDED:
                raise UsageError(
                    f"adaptive stepping needs an embedded pair ({', '.join(EMBEDDED)}); "
                    f"give --steps to run {self.method} with fixed steps")
            try:
                self.controller()
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        elif self.n_steps < 1:
            raise UsageError("--steps must be at least 1")

    def controller(self):
        return ControllerConfig(atol=self.atol, rtol=self.rtol)


def build_problem(spec):
    """Problem of ``spec`` with its initial value set per ``spec.init``."""
    if spec.problem == 'files':
        try:
            problem = load_generalized_files(spec.files['A'], spec.files['B'], spec.files['C'],
                                             spec.files.get('E'))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load problem files: {exc}") from None
        if spec.init == 'random':
            problem = problem.with_initial(random_initial_factor(problem.n, spec.rank, spec.seed))
    else:
        try:
            problem = advection_diffusion(spec.n0, seed=spec.seed, rank=spec.rank)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if spec.init == 'zero':
        problem = problem.with_initial(LowRankSym.zeros(problem.n))
    elif spec.init == 'steady':
        _check_oracle_cap(problem.n, DENSE_CAP)
        problem = problem.with_initial(LowRankSym.from_dense(steady_state(problem)))
    return problem


def _check_oracle_cap(n, cap):
    if n > cap:
        raise UsageError(
            f"N = {n} exceeds the dense reference limit {cap}; choose a smaller n0 "
            f"(n0 <= {int(np.sqrt(cap))})")


def run(spec):
    """Integrate ``spec``; returns the :class:`Trajectory`."""
    problem = build_problem(spec)
    if spec.n_steps is not None:
        return solve_fixed(problem, spec.method, spec.n_steps, spec.t_end)
    return solve_adaptive(problem, spec.method, spec.controller(), spec.t_end)


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns, rows):
    """Header plus rows; floats in shortest round-trip form. ``None`` or ``-``
    writes to standard output."""
    lines = [[_fmt(v) for v in row] for row in rows]
    if path in (None, '-'):
        w = csv.writer(sys.stdout, lineterminator='\n')
        w.writerow(columns)
        w.writerows(lines)
        return
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(columns)
        w.writerows(lines)


def _summary(traj, wall):
    steps = len(traj.times)
    rejects = int(sum(traj.rejects))
    norm = traj.norms[-1] if traj.norms else float('nan')
    return f"steps={steps} rejects={rejects} final_norm={norm:.6e} wall={wall:.2f}s"


def cmd_solve(spec):
    """Integrate and write the trajectory CSV; returns the exit status."""
    spec.validate()
    t0 = time.perf_counter()
    try:
        traj = run(spec)
    except StepSizeError as exc:
        if exc.trajectory is not None:
            write_csv(spec.out, SOLVE_COLUMNS, exc.trajectory.rows())
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_csv(spec.out, SOLVE_COLUMNS, traj.rows())
    _info(_summary(traj, time.perf_counter() - t0), spec.out)
    return EXIT_OK


def _info(msg, out):
    # keep stdout clean when it carries the CSV
    print(msg, file=sys.stderr if out in (None, '-') else sys.stdout)


def _relative_error(X, ref):
    return float(np.linalg.norm(X.to_dense() - ref) / np.linalg.norm(ref))


def fitted_slope(ns, errors):
    """Order ``p`` of a least-squares fit ``error ~ C n^(-p)``."""
    return float(-np.polyfit(np.log(ns), np.log(errors), 1)[0])


def convergence_table(spec, step_counts, oracle_rtol=1e-12):
    """``[(n, relative error at t_end)]`` for fixed-step runs of ``spec``."""
    problem = build_problem(spec)
    _check_oracle_cap(problem.n, DENSE_CAP)
    ref = dense_solve(problem, spec.t_end, rtol=oracle_rtol)
    rows = []
    for n in step_counts:
        traj = solve_fixed(problem, spec.method, n, spec.t_end)
        rows.append((int(n), _relative_error(traj.final, ref)))
    return rows


def cmd_convergence(spec, step_counts, oracle_rtol=1e-12):
    spec.validate()
    if any(n < 1 for n in step_counts):
        raise UsageError("step counts must be positive")
    rows = convergence_table(spec, step_counts, oracle_rtol)
    write_csv(spec.out, CONVERGENCE_COLUMNS, rows)
    if len(rows) > 1:
        _info(f"slope={fitted_slope(*zip(*rows)):.4f}", spec.out)
    return EXIT_OK


def tolerance_table(spec, tols, oracle_rtol=1e-12):
    """``[(tol, steps, rejects, relative error)]`` with ``atol = rtol = tol``."""
    if spec.method not in EMBEDDED:
        raise UsageError(f"tolerance study needs an embedded pair ({', '.join(EMBEDDED)})")
    problem = build_problem(spec)
    _check_oracle_cap(problem.n, DENSE_CAP)
    ref = dense_solve(problem, spec.t_end, rtol=oracle_rtol)
    rows = []
    for tol in tols:
        traj = solve_adaptive(problem, spec.method, ControllerConfig(atol=tol, rtol=tol), spec.t_end)
        rows.append((float(tol), len(traj.times), int(sum(traj.rejects)),
                     _relative_error(traj.final, ref)))
    return rows


def monotone_in_tol(rows):
    """True when the error does not grow as the tolerance shrinks."""
    ordered = sorted(rows, key=lambda r: -r[0])
    errs = [r[-1] for r in ordered]
    return all(b <= a for a, b in zip(errs, errs[1:]))


def cmd_tolstudy(spec, tols, oracle_rtol=1e-12):
    spec.n_steps = None
    spec.validate()
    if any(not t > 0 for t in tols):
        raise UsageError("tolerances must be positive")
    try:
        rows = tolerance_table(spec, tols, oracle_rtol)
    except StepSizeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_csv(spec.out, TOLSTUDY_COLUMNS, rows)
    if not monotone_in_tol(rows):
        _info("warning: errors are not monotone in tol", spec.out)
    return EXIT_OK


def phitest_errors(N, ks, trials, seed=0, hs=(0.01, 0.1)):
    """Relative Frobenius errors of :func:`phi_lyap` against the Kronecker
    reference, one per (trial, h, k)."""
    if N > KRON_CAP:
        raise UsageError(f"phitest needs N <= {KRON_CAP}, got {N}")
    if N < 1 or trials < 1:
        raise UsageError("N and trials must be positive")
    bad = [k for k in ks if not 0 <= k <= MAX_PHI_ORDER]
    if bad:
        raise UsageError(f"phi order {bad[0]} unsupported; use 0..{MAX_PHI_ORDER}")
    kmax = max(ks)
    out = []
    for trial in range(trials):
        op, M = random_closed_loop(N, seed=seed + trial)
        An = op.to_dense()
        Md = M.to_dense()
        for h in hs:
            refs = dense_phi_lyap_all(An, h, Md, kmax)
            for k in ks:
                got = phi_lyap(op, h, k, M).to_dense()
                out.append(float(np.linalg.norm(got - refs[k]) / np.linalg.norm(refs[k])))
    return out


def cmd_phitest(N, ks, trials, seed=0, hs=(0.01, 0.1)):
    errs = phitest_errors(N, ks, trials, seed, hs)
    worst = max(errs)
    ok = worst <= PHITEST_LIMIT
    print(f"phitest N={N} k={','.join(map(str, ks))} trials={trials}: "
          f"max relative error {worst:.3e} -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# argument parsing

def _float_list(s):
    try:
        return [float(v) for v in s.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _int_list(s):
    try:
        return [int(v) for v in s.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def _common(p):
    p.add_argument('--config', help="key-value file of defaults; flags override it")
    p.add_argument('--problem', default='adv-diff', help="'adv-diff' or 'files'")
    p.add_argument('--n0', type=int, default=8, help="grid points per direction (adv-diff)")
    p.add_argument('--A-file', dest='a_file', help="Matrix Market A (problem=files)")
    p.add_argument('--B-file', dest='b_file', help="CSV B, N x q (problem=files)")
    p.add_argument('--C-file', dest='c_file', help="CSV C, p x N (problem=files)")
    p.add_argument('--E-file', dest='e_file', help="CSV diagonal of E (problem=files)")
    p.add_argument('--init', default='random', choices=('random', 'zero', 'steady'),
                   help="initial value: seeded random factor, zero, or the dense steady state")
    p.add_argument('--rank', type=int, default=1, help="columns of the random initial factor")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--method', default='exprb32')
    p.add_argument('--t-end', dest='t_end', type=float, default=0.1)
    p.add_argument('--out', help="CSV path; standard output when omitted")


def _tols(p):
    p.add_argument('--tol', type=float, help="sets both --atol and --rtol")
    p.add_argument('--atol', type=float)
    p.add_argument('--rtol', type=float)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='lrdre', description="Low-rank exponential Rosenbrock solvers for Riccati ODEs.")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('solve', help="integrate one problem and write its trajectory")
    _common(p)
    _tols(p)
    p.add_argument('--steps', type=int, help="fixed step count; adaptive when omitted")

    p = sub.add_parser('convergence', help="fixed-step errors against the dense reference")
    _common(p)
    p.add_argument('--steps', type=_int_list, default=[16, 32, 64, 128],
                   help="comma-separated step counts")
    p.add_argument('--oracle-rtol', dest='oracle_rtol', type=float, default=1e-12)

    p = sub.add_parser('tolstudy', help="adaptive errors against the dense reference")
    _common(p)
    p.set_defaults(t_end=0.002)
    p.add_argument('--tol', type=_float_list, default=[1e-3, 1e-4, 1e-5],
                   help="comma-separated tolerances (atol = rtol = tol)")
    p.add_argument('--oracle-rtol', dest='oracle_rtol', type=float, default=1e-12)

    p = sub.add_parser('phitest', help="check phi_lyap against the Kronecker reference")
    p.add_argument('--config', help="key-value file of defaults; flags override it")
    p.add_argument('--N', dest='N', type=int, default=25)
    p.add_argument('--k', type=_int_list, default=[0, 1, 2, 3, 4])
    p.add_argument('--trials', type=int, default=20)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--h', type=_float_list, default=[0.01, 0.1])
    return parser, sub.choices


def read_config(path):
    """Flat ``{option_dest: string}`` from a key-value file."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if not text.lstrip().startswith('['):
        text = '[lrdre]\n' + text
    cp.read_string(text)
    out = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            out[key.strip().replace('-', '_')] = value.strip()
    return out


def _apply_config(argv, subparsers):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('--config')
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        values = read_config(known.config)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    values.pop('config', None)
    dests = {p: {a.dest for a in sp._actions} for p, sp in subparsers.items()}
    unknown = sorted(k for k in values if not any(k in d for d in dests.values()))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    for name, sp in subparsers.items():
        sp.set_defaults(**{k: v for k, v in values.items() if k in dests[name]})


def _spec_from_args(args, adaptive_tols=True):
    spec = RunSpec(method=args.method, t_end=args.t_end, problem=args.problem, n0=args.n0,
                   files={'A': args.a_file, 'B': args.b_file, 'C': args.c_file, 'E': args.e_file},
                   init=args.init, rank=args.rank, seed=args.seed, out=args.out)
    if adaptive_tols:
        base = args.tol
        spec.atol = args.atol if args.atol is not None else (base if base is not None else spec.atol)
        spec.rtol = args.rtol if args.rtol is not None else (base if base is not None else spec.rtol)
    return spec


def main(argv: Optional[Sequence[str]] = None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        _apply_config(argv, subparsers)
    except UsageError as exc:
        print(f"lrdre: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == 'solve':
            spec = _spec_from_args(args)
            spec.n_steps = args.steps
            return cmd_solve(spec)
        if args.command == 'convergence':
            spec = _spec_from_args(args, adaptive_tols=False)
            spec.n_steps = max(args.steps) if args.steps else 0
            if not args.steps:
                raise UsageError("--steps needs at least one value")
            return cmd_convergence(spec, args.steps, args.oracle_rtol)
        if args.command == 'tolstudy':
            spec = _spec_from_args(args, adaptive_tols=False)
            if not args.tol:
                raise UsageError("--tol needs at least one value")
            return cmd_tolstudy(spec, args.tol, args.oracle_rtol)
        return cmd_phitest(args.N, args.k, args.trials, args.seed, args.h)
    except (UsageError, OracleCapError) as exc:
        print(f"lrdre: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LrdreError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == '__main__':
    sys.exit(main())
