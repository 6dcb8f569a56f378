"""Generic positive-step splitting integrator.

A :class:`FlowPair` holds the two partial flows.  Lie-Trotter chains built
from them are combined with the weights of a :class:`~possplit.coeffs.SchemeSpec`
into one step of an affine (extrapolated) method.  The chains of one step are
independent and can be evaluated on a thread pool; the weighted sum is always
reduced in the same order, so threaded and sequential runs agree bit for bit.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .coeffs import SchemeSpec, Variant
from .errors import DegenerateInput, NumericFailure, UsageError

__all__ = [
    "Sign",
    "FlowPair",
    "SplittingMethod",
    "Trajectory",
    "lie_step",
    "strang_step",
    "chain_eval",
    "affine_step",
    "integrate",
    "estimate_lipschitz",
    "thread_count",
]

THREADS_ENV = "POSSPLIT_THREADS"


class Sign(enum.Enum):
    PLUS = "plus"    # flow1 after flow0
    MINUS = "minus"  # flow0 after flow1


def euclidean_norm(u) -> float:
    return float(np.linalg.norm(np.ravel(u)))


class FlowPair:
    """The partial flows ``flow0`` and ``flow1`` of a split problem.

    Both are called as ``flow(h, u)`` and must not mutate ``u``.  The wrapper
    enforces the positive-step contract and returns ``u`` itself at ``h = 0``.

    Parameters
    ----------
    flow0, flow1 : callable
        Partial flows ``(h, u) -> u'``.
    norm : callable, optional
        Norm of the phase space; Euclidean by default.
    """

    def __init__(self, flow0, flow1, norm: Optional[Callable] = None):
        self._flow0 = flow0
        self._flow1 = flow1
        self.norm = norm or euclidean_norm

    @staticmethod
    def _apply(flow, h, u):
        if h < 0:
            raise AssertionError(f"partial flow evaluated at negative time {h}")
        if h == 0:
            return u
        return flow(h, u)

    def flow0(self, h, u):
        return self._apply(self._flow0, h, u)

    def flow1(self, h, u):
        return self._apply(self._flow1, h, u)


def _as_sign(sign) -> Sign:
    if isinstance(sign, Sign):
        return sign
    try:
        return Sign(sign)
    except ValueError:
        raise UsageError(f"sign must be 'plus' or 'minus', got {sign!r}") from None


def lie_step(flows: FlowPair, sign, h, u):
    """One Lie-Trotter step; ``plus`` applies flow0 first."""
    if _as_sign(sign) is Sign.PLUS:
        return flows.flow1(h, flows.flow0(h, u))
    return flows.flow0(h, flows.flow1(h, u))


def strang_step(flows: FlowPair, h, u):
    half = h / 2
    return flows.flow0(half, flows.flow1(h, flows.flow0(half, u)))


def chain_eval(flows: FlowPair, sign, m: int, h, u):
    """Apply ``m`` Lie-Trotter steps of size ``h / m`` to ``u``."""
    if m < 1:
        raise UsageError(f"chain length must be >= 1, got {m}")
    sign = _as_sign(sign)
    sub = h / m
    for _ in range(m):
        u = lie_step(flows, sign, sub, u)
    return u


def thread_count() -> int:
    """Worker cap read from ``POSSPLIT_THREADS``; 0 means sequential.

    Unset means one worker per CPU.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}") from None
    if n < 0:
        raise UsageError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}")
    return n


@dataclass
class SplittingMethod:
    """An affine splitting method bound to a pair of flows.

    ``workers=None`` defers to ``POSSPLIT_THREADS`` when ``parallel`` is set.
    """

    scheme: SchemeSpec
    flows: FlowPair
    parallel: bool = False
    workers: Optional[int] = None
    weights: tuple = field(init=False)
    _pool: Optional[ThreadPoolExecutor] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.weights = self.scheme.float_weights()
        if self.scheme.variant is Variant.SYMMETRIC:
            self._tasks = [(m, sign) for m in range(1, self.scheme.chains + 1)
                           for sign in (Sign.PLUS, Sign.MINUS)]
        else:
            sign = Sign.PLUS if self.scheme.variant is Variant.ASYMMETRIC_PLUS else Sign.MINUS
            self._tasks = [(m, sign) for m in range(1, self.scheme.chains + 1)]

    @property
    def norm(self):
        return self.flows.norm

    def _n_workers(self) -> int:
        if not self.parallel:
            return 0
        n = self.workers if self.workers is not None else thread_count()
        return min(n, len(self._tasks))

    def _executor(self, n):
        if self._pool is None or self._pool._max_workers != n:
            if self._pool is not None:
                self._pool.shutdown()
            self._pool = ThreadPoolExecutor(max_workers=n, thread_name_prefix="possplit")
        return self._pool

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _chain(self, task, h, u):
        m, sign = task
        out = chain_eval(self.flows, sign, m, h, u)
        if not np.all(np.isfinite(out)):
            raise NumericFailure(f"chain m={m} ({sign.value}) produced a non-finite value at h={h}")
        return out

    def chains(self, h, u) -> list:
        """Evaluate every chain of one step, in reduction order."""
        n = self._n_workers()
        if n <= 1:
            return [self._chain(t, h, u) for t in self._tasks]
        pool = self._executor(n)
        return list(pool.map(lambda t: self._chain(t, h, u), self._tasks))

    def __call__(self, h, u):
        return affine_step(self, h, u)


def affine_step(method: SplittingMethod, h, u):
    """One step of the affine method.

    Summation runs over ascending ``m``; for symmetric schemes the plus and
    minus chains of equal ``m`` are added first and then weighted.
    """
    if h < 0:
        raise UsageError(f"step size must be non-negative, got {h}")
    if h == 0:
        return np.array(u, copy=True)
    results = method.chains(h, u)
    w = method.weights
    if method.scheme.variant is Variant.SYMMETRIC:
        acc = w[0] * (results[0] + results[1])
        for i in range(1, len(w)):
            acc = acc + w[i] * (results[2 * i] + results[2 * i + 1])
    else:
        acc = w[0] * results[0]
        for i in range(1, len(w)):
            acc = acc + w[i] * results[i]
    return acc


@dataclass
class Trajectory:
    """States ``U_n`` at times ``t_n = n h``, with their norms."""

    h: float
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    norms: list = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    @property
    def final(self):
        return self.states[-1]

    def append(self, t, state, norm):
        self.times.append(t)
        self.states.append(state)
        self.norms.append(norm)


def integrate(method: SplittingMethod, u0, h, n_steps: int,
              observer: Optional[Callable] = None) -> Trajectory:
    """Advance ``u0`` by ``n_steps`` affine steps of size ``h``.

    ``observer(n, t, state)`` is called after every step, including ``n = 0``.
    On a non-finite chain the :class:`NumericFailure` carries the partial
    trajectory and the index of the failing step.
    """
    if not h > 0:
        raise UsageError(f"h must be positive, got {h}")
    if n_steps < 0:
        raise UsageError(f"n_steps must be non-negative, got {n_steps}")
    norm = method.norm
    u = np.asarray(u0)
    traj = Trajectory(h)
    traj.append(0.0, u, norm(u))
    if observer is not None:
        observer(0, 0.0, u)
    for n in range(1, n_steps + 1):
        try:
            u = affine_step(method, h, u)
        except NumericFailure as exc:
            exc.step_index = n
            exc.trajectory = traj
            raise
        t = n * h
        traj.append(t, u, norm(u))
        if observer is not None:
            observer(n, t, u)
    return traj


def estimate_lipschitz(method, h, pairs: Sequence, norm: Optional[Callable] = None) -> float:
    """Sample lower bound of the Lipschitz constant of ``method(h, .)``.

    ``method`` is any ``(h, u) -> u'`` callable; a :class:`SplittingMethod`
    supplies its own norm.

    Raises
    ------
    DegenerateInput
        If ``pairs`` is empty or some pair has zero separation.
    """
    if not pairs:
        raise DegenerateInput("estimate_lipschitz needs at least one pair")
    if norm is None:
        norm = getattr(method, "norm", euclidean_norm)
    best = 0.0
    for u, v in pairs:
        d = norm(np.asarray(u) - np.asarray(v))
        if d == 0:
            raise DegenerateInput("sample pair with zero separation")
        best = max(best, norm(method(h, u) - method(h, v)) / d)
    return best
