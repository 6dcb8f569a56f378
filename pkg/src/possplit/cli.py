"""Command-line entry point.

Subcommands::

    possplit coeffs    --variant sym|asym --order Q [--format rational|decimal]
    possplit integrate --problem P --variant V --order Q --h H --T T [...]
    possplit converge  --problem P --variant V --orders 4,6,8 --T T [--h-grid ...]
    possplit decay     --problem sp --datum odd --order 8 --h 0.1 --T 10 --eta 255

Options may also come from ``--config FILE`` holding ``key = value`` lines
with the flag names as keys; flags given on the command line win.
Exit codes: 0 success, 1 usage error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from .coeffs import scheme_for, step_counts
from .core import SplittingMethod, integrate
from .errors import (NumericFailure, PossplitError, SymmetryViolation, TanDomain,
                     UsageError)
from .harness import (convergence_study, decay_monitor, global_errors, gnuplot_script,
                      report_csv, steps_for, study_csv)
from .problems import PROBLEM_NAMES, make_problem
from .spectral import grid_csv

log = logging.getLogger("possplit")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

# Defaults for ``converge`` when --h-grid is omitted.
DEFAULT_H_GRIDS = {
    "lambdaomega": (2.0, 1.0, 0.5, 0.25),
    "sp": (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625),
    "tanrot": (0.2, 0.1, 0.05, 0.025, 0.0125),
}
DEFAULT_ETA = {"lambdaomega": 63, "sp": 31}
PROBLEM_KEYS = ("omega0", "omega1", "L", "beta", "lambda", "nu0", "r0", "theta0")


def _g(x) -> str:
    return f"{x:.17g}"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_problem_options(p):
    p.add_argument("--problem", choices=PROBLEM_NAMES + ("schrodinger-poisson",))
    p.add_argument("--datum", help="initial datum: planar|perturbed (lambdaomega), monokinetic|odd|even (sp)")
    p.add_argument("--eta", type=int, help="odd number of grid points")
    p.add_argument("--u0", type=_floats, help="initial state for tanrot, e.g. 1,1.5")
    p.add_argument("--omega0", type=float)
    p.add_argument("--omega1", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--nu0", type=int)
    p.add_argument("--r0", type=float)
    p.add_argument("--theta0", type=float)


def _add_method_options(p, single_order=True):
    p.add_argument("--variant", choices=("sym", "asym"), default="sym")
    p.add_argument("--sign", choices=("plus", "minus"), default="plus",
                   help="chain orientation of the asymmetric variant")
    if single_order:
        p.add_argument("--order", type=int)
    p.add_argument("--T", type=float)
    p.add_argument("--parallel", action="store_true",
                   help="evaluate the chains of each step on a thread pool (POSSPLIT_THREADS caps workers)")
    p.add_argument("--out", help="output file (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="possplit", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="file of 'key = value' lines supplying option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    verbose = _Parser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("coeffs", parents=[verbose], help="print exact weights of a scheme")
    p.add_argument("--variant", choices=("sym", "asym"), default="sym")
    p.add_argument("--order", type=int)
    p.add_argument("--format", choices=("rational", "decimal"), default="rational")
    p.add_argument("--out")

    p = sub.add_parser("integrate", parents=[verbose], help="integrate one problem and write its trajectory")
    _add_problem_options(p)
    _add_method_options(p)
    p.add_argument("--h", type=float)
    p.add_argument("--state-out", help="write the final grid function as x,re,im CSV")

    p = sub.add_parser("converge", parents=[verbose], help="global errors over a step-size grid and fitted orders")
    _add_problem_options(p)
    _add_method_options(p, single_order=False)
    p.add_argument("--orders", type=_ints)
    p.add_argument("--h-grid", dest="h_grid", type=_floats)
    p.add_argument("--jobs", type=int, default=0, help="run independent (order, h) cases concurrently")

    p = sub.add_parser("decay", parents=[verbose], help="check ||U_n|| <= exp(-rate t_n) ||U_0||")
    _add_problem_options(p)
    _add_method_options(p)
    p.add_argument("--h", type=float)
    p.add_argument("--rate", type=float, default=1.0)
    return parser


def read_config(path) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"--config {path}:{lineno}: expected 'key = value'")
        values[key.strip().lstrip("-")] = value.strip()
    return values


def _config_argv(values: dict, command: str, parser) -> list:
    sub = parser._subparsers._group_actions[0].choices[command]
    known = {}
    for action in sub._actions:
        for opt in action.option_strings:
            known[opt.lstrip("-")] = action
    argv = []
    for key, value in values.items():
        action = known.get(key) or known.get(key.replace("_", "-"))
        if action is None:
            raise UsageError(f"--config: unknown key {key!r} for '{command}'")
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
        else:
            argv += [flag, value]
    return argv


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("missing subcommand (coeffs, integrate, converge, decay)")
    if args.config:
        extra = _config_argv(read_config(args.config), args.command, parser)
        # Config flags go right after the subcommand; later command-line flags win.
        i = argv.index(args.command)
        args = parser.parse_args(argv[:i + 1] + extra + argv[i + 1:])
    return args


def _write(path, text):
    """Write to ``path`` atomically (temp file + rename), or to stdout."""
    if not path:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required for '{args.command}'")


def _problem(args, **extra):
    _require(args, "problem")
    name = {"schrodinger-poisson": "sp"}.get(args.problem, args.problem)
    params = {k: getattr(args, k, None) for k in ("omega0", "omega1", "L", "beta", "nu0", "r0", "theta0")}
    params["lambda"] = args.lambda_
    if name in ("lambdaomega", "sp"):
        params["eta"] = args.eta if args.eta is not None else DEFAULT_ETA[name]
    elif args.eta is not None:
        raise UsageError("--eta only applies to the PDE problems")
    if name == "tanrot":
        if any(params[k] is not None for k in PROBLEM_KEYS if k != "lambda") or args.lambda_ is not None:
            raise UsageError("tanrot takes no PDE parameters; use --u0")
        params = {"u0": args.u0}
    elif args.u0 is not None:
        raise UsageError("--u0 only applies to tanrot")
    if name == "lambdaomega":
        for k in ("beta", "lambda", "nu0", "r0"):
            if params.pop(k, None) is not None:
                raise UsageError(f"--{k} does not apply to lambdaomega")
    if name == "sp":
        for k in ("omega0", "omega1", "L"):
            if params.pop(k, None) is not None:
                raise UsageError(f"--{k} does not apply to sp (period fixed at 2*pi)")
    return make_problem(name, datum=args.datum, **params, **extra)


def cmd_coeffs(args):
    _require(args, "order")
    spec = scheme_for(args.variant, args.order)
    lines = []
    for m, g in enumerate(spec.gamma, start=1):
        value = f"{g.numerator}/{g.denominator}" if args.format == "rational" else _g(float(g))
        lines.append(f"{m}\t{value}")
    _write(args.out, "\n".join(lines) + "\n")
    cost = step_counts(spec)
    log.info("%s: S_T=%d S_P=%d", spec.name, cost.total_steps, cost.parallel_steps)
    return EXIT_OK


def _trajectory_csv(problem, traj) -> str:
    ode = problem.grid is None
    header = ["n", "t", "norm"]
    if ode:
        header += [f"u{i + 1}" for i in range(len(problem.u0))]
    if problem.exact is not None:
        header.append("error")
    lines = [",".join(header)]
    for n, (t, u, nrm) in enumerate(zip(traj.times, traj.states, traj.norms)):
        row = [str(n), _g(t), _g(nrm)]
        if ode:
            row += [_g(x) for x in u]
        if problem.exact is not None:
            row.append(_g(problem.norm(u - problem.exact(t))))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _method(args, problem):
    _require(args, "order")
    spec = scheme_for(args.variant, args.order, args.sign)
    return SplittingMethod(spec, problem.flows, parallel=args.parallel)


def cmd_integrate(args):
    _require(args, "h", "T")
    n = steps_for(args.T, args.h)
    extra = {}
    if args.problem == "tanrot":
        extra = {"reference_h": args.h / 100, "T": args.T}
    problem = _problem(args, **extra)
    method = _method(args, problem)
    t0 = time.perf_counter()
    try:
        traj = integrate(method, problem.u0, args.h, n)
    finally:
        method.close()
    log.info("integrated %d steps in %.3fs", n, time.perf_counter() - t0)
    _write(args.out, _trajectory_csv(problem, traj))
    if args.state_out:
        if problem.grid is None:
            raise UsageError("--state-out needs a PDE problem")
        _write(args.state_out, grid_csv(problem.grid, traj.final))
    if problem.exact is not None:
        e_abs, e_rel = global_errors(traj, problem.exact, problem.norm)
        log.info("E_abs=%.3e E_rel=%.3e", e_abs, e_rel)
    return EXIT_OK


def cmd_converge(args):
    _require(args, "orders", "T")
    name = {"schrodinger-poisson": "sp"}.get(args.problem, args.problem)
    h_grid = args.h_grid or DEFAULT_H_GRIDS.get(name)
    extra = {}
    if name == "tanrot":
        extra = {"reference_h": min(h_grid) / 100, "T": args.T}
    problem = _problem(args, **extra)
    reports = convergence_study(problem, args.variant, args.orders, h_grid, args.T,
                                sign=args.sign, parallel=args.parallel, jobs=args.jobs)
    _write(args.out, study_csv(reports))
    fits = report_csv(reports)
    if args.out:
        stem = Path(args.out).with_suffix("")
        _write(f"{stem}_fit.csv", fits)
        _write(f"{stem}.gp", gnuplot_script(Path(args.out).name, args.orders,
                                            f"{problem.name} {args.variant}"))
    else:
        sys.stderr.write(fits)
    for r in reports:
        for p in r.points:
            log.info("q=%d h=%g time=%.3fs", r.order, p.h, p.seconds)
    return EXIT_OK


def cmd_decay(args):
    _require(args, "h", "T")
    n = steps_for(args.T, args.h)
    problem = _problem(args)
    method = _method(args, problem)
    try:
        traj = integrate(method, problem.u0, args.h, n)
    finally:
        method.close()
    bad = decay_monitor(traj, args.rate)
    lines = ["n,t,norm,bound"]
    n0 = traj.norms[0]
    for k, (t, nrm) in enumerate(zip(traj.times, traj.norms)):
        lines.append(f"{k},{_g(t)},{_g(nrm)},{_g(np.exp(-args.rate * t) * n0)}")
    _write(args.out, "\n".join(lines) + "\n")
    sys.stderr.write(f"violations: {len(bad)}\n")
    for k, t, ratio in bad:
        sys.stderr.write(f"  n={k} t={_g(t)} norm/bound={_g(ratio)}\n")
    return EXIT_OK


COMMANDS = {"coeffs": cmd_coeffs, "integrate": cmd_integrate,
            "converge": cmd_converge, "decay": cmd_decay}


def parse_and_run(argv=None) -> int:
    """Run one subcommand and return the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(name)s: %(message)s", stream=sys.stderr)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"possplit: usage error: {exc}\n")
        return EXIT_USAGE
    except (NumericFailure, TanDomain, SymmetryViolation, FloatingPointError) as exc:
        sys.stderr.write(f"possplit: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except PossplitError as exc:
        sys.stderr.write(f"possplit: error: {exc}\n")
        return EXIT_NUMERIC


def main():
    sys.exit(parse_and_run())


if __name__ == "__main__":
    main()
