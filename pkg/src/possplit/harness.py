"""Convergence studies, global errors, order fits and decay monitoring."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .coeffs import scheme_for
from .core import SplittingMethod, Trajectory, euclidean_norm, integrate
from .errors import InsufficientData, UsageError

__all__ = [
    "ErrorPoint",
    "OrderFit",
    "ConvergenceReport",
    "global_errors",
    "fit_order",
    "steps_for",
    "convergence_study",
    "decay_monitor",
    "study_csv",
    "report_csv",
    "gnuplot_script",
    "ROUNDOFF_FLOOR",
    "ERROR_CAP",
]

log = logging.getLogger(__name__)

ROUNDOFF_FLOOR = 1e-12
ERROR_CAP = 1e-2
REL_TINY = 1e-300


@dataclass(frozen=True)
class ErrorPoint:
    h: float
    e_abs: float
    e_rel: float
    seconds: float = 0.0


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    h_lo: float
    h_hi: float
    points_used: int


@dataclass
class ConvergenceReport:
    problem: str
    variant: str
    order: int
    points: list = field(default_factory=list)
    fit: Optional[OrderFit] = None

    @property
    def fitted_slope(self):
        return None if self.fit is None else self.fit.slope

    @property
    def scheme_id(self) -> str:
        return f"{self.variant}{self.order}"

    def error_at(self, h, kind="abs") -> float:
        for p in self.points:
            if np.isclose(p.h, h, rtol=1e-12, atol=0):
                return p.e_abs if kind == "abs" else p.e_rel
        raise KeyError(h)


def global_errors(traj: Trajectory, exact: Callable, norm: Callable = euclidean_norm):
    """Maximum absolute and relative deviation from ``exact`` over the trajectory.

    Times where the exact norm is below 1e-300 are left out of the relative error.
    """
    e_abs = 0.0
    e_rel = 0.0
    for t, u in zip(traj.times, traj.states):
        ref = exact(t)
        err = norm(np.asarray(u) - ref)
        e_abs = max(e_abs, err)
        scale = norm(ref)
        if scale >= REL_TINY:
            e_rel = max(e_rel, err / scale)
    return e_abs, e_rel


def fit_order(points: Sequence, floor: float = ROUNDOFF_FLOOR, scale: float = 1.0,
              cap: float = ERROR_CAP) -> OrderFit:
    """Least-squares slope of ``log(error)`` against ``log(h)``.

    Only points with ``floor * scale <= error <= cap`` take part.

    Parameters
    ----------
    points : sequence of (h, error)
    floor : float
        Round-off floor relative to ``scale``.
    scale : float
        Norm scale of the solution.
    cap : float
        Errors above this are treated as pre-asymptotic.

    Raises
    ------
    InsufficientData
        If fewer than three points survive the filter.
    """
    lo = floor * scale
    kept = sorted((float(h), float(e)) for h, e in points if lo <= e <= cap and h > 0)
    if len(kept) < 3:
        raise InsufficientData(f"only {len(kept)} of {len(points)} points inside [{lo:.3g}, {cap:.3g}]")
    x = np.log([h for h, _ in kept])
    y = np.log([e for _, e in kept])
    slope, intercept = np.polyfit(x, y, 1)
    return OrderFit(float(slope), float(intercept), kept[0][0], kept[-1][0], len(kept))


def steps_for(T: float, h: float) -> int:
    """Number of steps ``T / h``, which must be integral to 1e-9 relative."""
    if not h > 0:
        raise UsageError(f"step sizes must be positive, got {h}")
    n = int(round(T / h))
    if n < 1 or abs(n * h - T) > 1e-9 * T:
        raise UsageError(f"T/h must be an integer: T={T}, h={h}")
    return n


def _run_point(problem, scheme, h, T, parallel, workers) -> ErrorPoint:
    n = steps_for(T, h)
    method = SplittingMethod(scheme, problem.flows, parallel=parallel, workers=workers)
    t0 = time.perf_counter()
    try:
        traj = integrate(method, problem.u0, h, n)
    finally:
        method.close()
    elapsed = time.perf_counter() - t0
    e_abs, e_rel = global_errors(traj, problem.exact, problem.norm)
    return ErrorPoint(h, e_abs, e_rel, elapsed)


def solution_scale(problem, T, h) -> float:
    n = steps_for(T, h)
    return max(problem.norm(problem.exact(k * h)) for k in range(n + 1))


def convergence_study(problem, variant: str, orders: Sequence[int], h_grid: Sequence[float],
                      T: float, sign: str = "plus", parallel: bool = False,
                      workers: Optional[int] = None, jobs: int = 0,
                      floor: float = ROUNDOFF_FLOOR, cap: float = ERROR_CAP) -> list:
    """Global errors of each scheme on each step size, with a fitted order per scheme.

    ``problem`` needs an ``exact`` solution.  ``jobs > 1`` runs the
    independent (order, h) cases on a thread pool; reports come back in the
    order of ``orders`` and ``h_grid`` regardless.
    """
    if problem.exact is None:
        raise UsageError(f"problem {problem.name!r} has no exact solution for a convergence study")
    for h in h_grid:
        steps_for(T, h)
    schemes = [scheme_for(variant, q, sign) for q in orders]
    cases = [(s, h) for s in schemes for h in h_grid]

    def run(case):
        s, h = case
        point = _run_point(problem, s, h, T, parallel, workers)
        log.info("%s %s h=%g e_abs=%.3e", problem.name, s.name, h, point.e_abs)
        return point

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, cases))
    else:
        results = [run(c) for c in cases]

    scale = solution_scale(problem, T, min(h_grid))
    reports = []
    it = iter(results)
    for q, s in zip(orders, schemes):
        rep = ConvergenceReport(problem.name, variant, q, [next(it) for _ in h_grid])
        try:
            rep.fit = fit_order([(p.h, p.e_abs) for p in rep.points], floor, scale, cap)
        except InsufficientData as exc:
            log.warning("%s %s: %s", problem.name, s.name, exc)
        reports.append(rep)
    return reports


def decay_monitor(traj: Trajectory, rate: float, tol: float = 1e-6) -> list:
    """Steps where ``||U_n|| > exp(-rate t_n) ||U_0|| (1 + tol)``.

    Returns a list of ``(n, t_n, ||U_n|| / (exp(-rate t_n) ||U_0||))``; empty means no violation.
    """
    if not len(traj):
        raise UsageError("decay_monitor needs a non-empty trajectory")
    n0 = traj.norms[0]
    bad = []
    for n, (t, nrm) in enumerate(zip(traj.times, traj.norms)):
        bound = np.exp(-rate * t) * n0
        if nrm > bound * (1 + tol):
            bad.append((n, t, nrm / bound if bound else np.inf))
    return bad


def _g(x) -> str:
    return f"{x:.17g}"


def study_csv(reports) -> str:
    lines = ["problem,variant,order,h,e_abs,e_rel"]
    for r in reports:
        for p in r.points:
            lines.append(f"{r.problem},{r.variant},{r.order},{_g(p.h)},{_g(p.e_abs)},{_g(p.e_rel)}")
    return "\n".join(lines) + "\n"


def report_csv(reports) -> str:
    lines = ["order,slope,h_lo,h_hi,points"]
    for r in reports:
        if r.fit is None:
            lines.append(f"{r.order},nan,nan,nan,0")
        else:
            f = r.fit
            lines.append(f"{r.order},{_g(f.slope)},{_g(f.h_lo)},{_g(f.h_hi)},{f.points_used}")
    return "\n".join(lines) + "\n"


def gnuplot_script(csv_name: str, orders: Sequence[int], title: str = "") -> str:
    """A gnuplot script drawing log-log error curves from a study CSV."""
    plots = ", ".join(
        f"'{csv_name}' skip 1 using ($3=={q} ? $4 : 1/0):5 with linespoints title 'q={q}'" for q in orders)
    return (
        "set datafile separator ','\n"
        "set logscale xy\n"
        "set key left top\n"
        "set xlabel 'h'\n"
        "set ylabel 'global error'\n"
        f"set title '{title}'\n"
        f"plot {plots}\n"
    )
