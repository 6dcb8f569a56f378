"""Benchmark problems: partial flows, exact solutions and reference data.

* ``tanrot``: the planar system ``u1' = 4 u2 - tan u1``, ``u2' = -4 u1 - tan u2``
  split into a rotation and a decoupled relaxation.
* ``lambdaomega``: the oscillatory reaction-diffusion (lambda-omega) system
  in complex form, split into heat flow and pointwise reaction.
* ``sp``: the regularized Schroedinger-Poisson equation with fractional
  damping, split into a dissipative free flow and a pure phase rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .core import FlowPair, Trajectory
from .errors import TanDomain, UsageError
from .spectral import (PeriodicGrid, SemigroupFlow, convolve, dft_forward,
                       poisson_kernel)

__all__ = [
    "Problem",
    "TanRotParams",
    "LambdaOmegaParams",
    "SchrodingerPoissonParams",
    "tanrot_flow0",
    "tanrot_flow1",
    "tanrot_rhs",
    "rk4_reference",
    "validated_rk4_reference",
    "lambdaomega_flow1",
    "exact_planar_wave",
    "perturbed_rd_datum",
    "exact_monokinetic",
    "exact_constant_periodic",
    "odd_sp_datum",
    "even_sp_datum",
    "parity_defect",
    "make_problem",
    "PROBLEM_NAMES",
]

HALF_PI = np.pi / 2


@lru_cache(maxsize=32)
def _grid(eta, L):
    return PeriodicGrid(eta, L)


@dataclass
class Problem:
    """A split problem ready for integration.

    ``exact`` maps a time to the exact (or reference) state, when one is known.
    """

    name: str
    flows: FlowPair
    u0: np.ndarray
    exact: Optional[Callable] = None
    grid: Optional[PeriodicGrid] = None
    params: object = None

    @property
    def norm(self):
        return self.flows.norm


# ---------------------------------------------------------------- tanrot

@dataclass(frozen=True)
class TanRotParams:
    """Planar rotation/relaxation system.

    ``strict_domain`` makes the relaxation flow reject states outside
    ``(-pi/2, pi/2)``.  It is off for the split problem: with large steps the
    rotation can carry an intermediate state past ``pi/2``, where the
    closed-form relaxation map ``arcsin(exp(-h) sin u)`` is still defined.
    """

    u0: tuple = (1.0, 1.5)
    rotation_rate: float = 4.0
    strict_domain: bool = False


def tanrot_flow0(h, u, rate=4.0):
    """Exact flow of ``u' = [[0, rate], [-rate, 0]] u``."""
    c, s = np.cos(rate * h), np.sin(rate * h)
    u = np.asarray(u, dtype=float)
    return np.array([c * u[0] + s * u[1], -s * u[0] + c * u[1]])


def _check_tan_domain(u):
    u = np.asarray(u, dtype=float)
    if not np.all(np.abs(u) < HALF_PI):
        raise TanDomain(f"state {u} left (-pi/2, pi/2)")


def tanrot_flow1(h, u, strict=True):
    """Exact flow of ``u_j' = -tan(u_j)``: ``arcsin(exp(-h) sin u_j)``."""
    if strict:
        _check_tan_domain(u)
    return np.arcsin(np.exp(-h) * np.sin(np.asarray(u, dtype=float)))


def tanrot_rhs(u, rate=4.0):
    u = np.asarray(u, dtype=float)
    return np.array([rate * u[1] - np.tan(u[0]), -rate * u[0] - np.tan(u[1])])


def rk4_reference(params: TanRotParams, u0, h_fine, T) -> Trajectory:
    """Classical RK4 on the full right-hand side, ``round(T / h_fine)`` steps."""
    if not h_fine > 0:
        raise UsageError(f"h_fine must be positive, got {h_fine}")
    n = int(round(T / h_fine))
    if abs(n * h_fine - T) > 1e-9 * max(T, 1.0):
        raise UsageError(f"T={T} is not an integer multiple of h_fine={h_fine}")
    w = params.rotation_rate
    tan = math.tan
    x, y = (float(c) for c in u0)
    _check_tan_domain((x, y))
    half, sixth = 0.5 * h_fine, h_fine / 6
    traj = Trajectory(h_fine)
    traj.append(0.0, np.array([x, y]), math.hypot(x, y))
    for i in range(1, n + 1):
        # Scalar arithmetic: this loop runs 10^4-10^5 times per reference.
        a1, b1 = w * y - tan(x), -w * x - tan(y)
        xs, ys = x + half * a1, y + half * b1
        a2, b2 = w * ys - tan(xs), -w * xs - tan(ys)
        xs, ys = x + half * a2, y + half * b2
        a3, b3 = w * ys - tan(xs), -w * xs - tan(ys)
        xs, ys = x + h_fine * a3, y + h_fine * b3
        a4, b4 = w * ys - tan(xs), -w * xs - tan(ys)
        x += sixth * (a1 + 2 * a2 + 2 * a3 + a4)
        y += sixth * (b1 + 2 * b2 + 2 * b3 + b4)
        if not (abs(x) < HALF_PI and abs(y) < HALF_PI):
            raise TanDomain(f"RK4 state ({x}, {y}) left (-pi/2, pi/2) at t={i * h_fine}")
        traj.append(i * h_fine, np.array([x, y]), math.hypot(x, y))
    return traj


def validated_rk4_reference(params: TanRotParams, u0, h_fine, T, tol=1e-10, max_halvings=8):
    """RK4 reference whose endpoint moves by at most ``tol`` when its step is halved.

    Starts from ``h_fine`` and halves the step until the check passes.
    Returns a callable ``t -> state`` defined at multiples of the accepted step.
    """
    coarse = rk4_reference(params, u0, h_fine, T)
    for _ in range(max_halvings):
        fine = rk4_reference(params, u0, coarse.h / 2, T)
        drift = float(np.max(np.abs(coarse.final - fine.final)))
        if drift <= tol:
            break
        coarse = fine
    else:
        raise AssertionError(f"RK4 reference not converged: last halving moved the endpoint by {drift:.3e}")
    states = fine.states
    step = fine.h

    def reference(t):
        i = t / step
        k = int(round(i))
        if abs(i - k) > 1e-6 or not 0 <= k < len(states):
            raise UsageError(f"reference not available at t={t}")
        return states[k]

    reference.drift = drift
    reference.h_fine = step
    return reference


def _tanrot_problem(params: TanRotParams, reference_h=None, T=None) -> Problem:
    rate = params.rotation_rate
    flows = FlowPair(lambda h, u: tanrot_flow0(h, u, rate),
                     lambda h, u: tanrot_flow1(h, u, strict=params.strict_domain))
    exact = None
    if reference_h is not None and T is not None:
        exact = validated_rk4_reference(params, params.u0, reference_h, T)
    return Problem("tanrot", flows, np.asarray(params.u0, dtype=float), exact, None, params)


# ----------------------------------------------------------- lambdaomega

@dataclass(frozen=True)
class LambdaOmegaParams:
    omega0: float = 1.0
    omega1: float = 0.5
    L: float = 4 * np.pi
    eta: int = 63
    theta0: float = 0.0

    @property
    def grid(self) -> PeriodicGrid:
        return _grid(self.eta, self.L)

    @property
    def r_star(self) -> float:
        if not self.L > 2 * np.pi:
            raise UsageError(f"planar waves need L > 2*pi, got L={self.L}")
        return float(np.sqrt(self.L ** 2 - 4 * np.pi ** 2) / self.L)

    @property
    def planar_wave_stable(self) -> bool:
        return self.L > 2 * np.pi * np.sqrt(3 + 2 * self.omega1 ** 2)


def lambdaomega_flow1(h, u, omega0=1.0, omega1=0.5):
    """Pointwise exact flow of ``u' = (1 - |u|^2) u + i (omega0 - omega1 |u|^2) u``."""
    u = np.asarray(u, dtype=complex)
    growth = 1 + np.expm1(2 * h) * np.abs(u) ** 2
    phase = omega0 * h - 0.5 * omega1 * np.log(growth)
    return u * np.exp(h) / np.sqrt(growth) * np.exp(1j * phase)


def heat_flow(grid: PeriodicGrid) -> SemigroupFlow:
    return SemigroupFlow(grid, lambda k2: -k2)


def exact_planar_wave(params: LambdaOmegaParams, t) -> np.ndarray:
    r = params.r_star
    grid = params.grid
    speed = params.omega0 - params.omega1 * r * r
    return r * np.exp(1j * (params.theta0 + grid.a * grid.x + speed * t))


def perturbed_rd_datum(params: LambdaOmegaParams) -> np.ndarray:
    """``0.8 u0 + 0.1 + 2.5 exp(2iax) - 0.8i exp(3iax)`` with ``u0`` the planar wave at t=0."""
    grid = params.grid
    ax = grid.a * grid.x
    return (0.8 * exact_planar_wave(params, 0.0) + 0.1
            + 2.5 * np.exp(2j * ax) - 0.8j * np.exp(3j * ax))


def _lambdaomega_problem(params: LambdaOmegaParams, datum="planar") -> Problem:
    grid = params.grid
    heat = heat_flow(grid)
    flows = FlowPair(heat,
                     lambda h, u: lambdaomega_flow1(h, u, params.omega0, params.omega1),
                     norm=grid.norm)
    if datum == "planar":
        u0, exact = exact_planar_wave(params, 0.0), (lambda t: exact_planar_wave(params, t))
    elif datum == "perturbed":
        u0, exact = perturbed_rd_datum(params), None
    else:
        raise UsageError(f"unknown lambdaomega datum {datum!r} (planar|perturbed)")
    return Problem("lambdaomega", flows, u0, exact, grid, params)


# -------------------------------------------------- Schroedinger-Poisson

@dataclass(frozen=True)
class SchrodingerPoissonParams:
    beta: float = 0.25
    lam: float = 1.0
    eta: int = 31
    nu0: int = 4
    r0: float = 1.0
    theta0: float = 0.0
    L: float = field(default=2 * np.pi, init=False)

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise UsageError(f"--beta must lie in (0, 1], got {self.beta}")

    @property
    def grid(self) -> PeriodicGrid:
        return _grid(self.eta, self.L)

    @property
    def kernel(self):
        return _kernel(self.eta, self.lam)


def sp_free_flow(grid: PeriodicGrid, beta) -> SemigroupFlow:
    """Flow of ``i d_xx - (-d_xx)^beta``: factor ``exp((-i k2 - k2**beta) h)``."""
    return SemigroupFlow(grid, lambda k2: -1j * k2 - k2 ** beta)


def sp_phase_flow(h, u, grid, kernel):
    """Exact flow of ``u' = i (|u|^2 + G * |u|^2) u``; ``|u|`` is conserved."""
    u = np.asarray(u, dtype=complex)
    rho = u.real ** 2 + u.imag ** 2
    potential = rho + convolve(grid, kernel, rho)
    return np.exp(1j * h * potential) * u


def exact_monokinetic(params: SchrodingerPoissonParams, t) -> np.ndarray:
    """Single-mode solution ``r(t) exp(i (nu0 x + theta(t)))``."""
    nu0, beta = params.nu0, params.beta
    grid = params.grid
    if nu0 == 0:
        raise UsageError("nu0 = 0 is the constant periodic solution; use exact_constant_periodic")
    if int(nu0) != nu0 or abs(nu0) > grid.l:
        raise UsageError(f"--nu0 must be an integer with |nu0| <= {grid.l}, got {nu0}")
    rate = abs(nu0) ** (2 * beta)
    g0 = params.kernel[0]
    r = params.r0 * np.exp(-rate * t)
    theta = (-nu0 ** 2 * t
             + 0.5 * (1 + g0) * params.r0 ** 2 / rate * -np.expm1(-2 * rate * t)
             + params.theta0)
    return r * np.exp(1j * (nu0 * grid.x + theta))


def exact_constant_periodic(params: SchrodingerPoissonParams, t) -> np.ndarray:
    """Spatially constant periodic solution ``r0 exp(i ((1 + G_0) r0^2 t + theta0))``."""
    g0 = params.kernel[0]
    value = params.r0 * np.exp(1j * ((1 + g0) * params.r0 ** 2 * t + params.theta0))
    return np.full(params.eta, value, dtype=complex)


def odd_sp_datum(grid: PeriodicGrid) -> np.ndarray:
    x = grid.x
    return np.exp(np.cos(2 * x) + 1j * np.pi / 6) * np.sin(5 * x)


def even_sp_datum(grid: PeriodicGrid) -> np.ndarray:
    x = grid.x
    return np.exp(np.cos(2 * x) + 1j * np.pi / 6) * (1 - 1.75 * np.cos(5 * x) ** 2)


def parity_defect(grid: PeriodicGrid, u, parity="odd") -> float:
    """Relative size of the part of ``u`` with the wrong parity, measured on DFT modes.

    Odd content means ``U_hat[nu] = -U_hat[eta - nu]`` (sine-only); even means ``+``.
    """
    c = dft_forward(grid, u)
    mirror = c[(-np.arange(grid.eta)) % grid.eta]
    bad = c + mirror if parity == "odd" else c - mirror
    scale = np.linalg.norm(c)
    return float(np.linalg.norm(bad) / (2 * scale)) if scale else 0.0


def _sp_problem(params: SchrodingerPoissonParams, datum="monokinetic") -> Problem:
    grid = params.grid
    kernel = params.kernel
    flows = FlowPair(sp_free_flow(grid, params.beta),
                     lambda h, u: sp_phase_flow(h, u, grid, kernel),
                     norm=grid.norm)
    if datum == "monokinetic":
        if params.nu0 == 0:
            exact = lambda t: exact_constant_periodic(params, t)  # noqa: E731
        else:
            exact = lambda t: exact_monokinetic(params, t)  # noqa: E731
        u0 = exact(0.0)
    elif datum == "odd":
        u0, exact = odd_sp_datum(grid), None
    elif datum == "even":
        u0, exact = even_sp_datum(grid), None
    else:
        raise UsageError(f"unknown sp datum {datum!r} (monokinetic|odd|even)")
    return Problem("sp", flows, u0, exact, grid, params)


@lru_cache(maxsize=32)
def _kernel(eta, lam):
    return poisson_kernel(_grid(eta, 2 * np.pi), lam)


# -------------------------------------------------------------- registry

PROBLEM_NAMES = ("tanrot", "lambdaomega", "sp")
_ALIASES = {"schrodinger-poisson": "sp", "rd": "lambdaomega", "ode": "tanrot"}


def make_problem(name: str, datum: Optional[str] = None, reference_h=None, T=None,
                 **params) -> Problem:
    """Build a problem by name from keyword parameters.

    Recognized keys: ``u0`` (tanrot), ``omega0``, ``omega1``, ``L``, ``eta``,
    ``theta0`` (lambdaomega), ``beta``, ``lambda``/``lam``, ``eta``, ``nu0``,
    ``r0``, ``theta0`` (sp).
    """
    name = _ALIASES.get(name, name)
    params = {k: v for k, v in params.items() if v is not None}
    if "lambda" in params:
        params["lam"] = params.pop("lambda")
    try:
        if name == "tanrot":
            if "u0" in params:
                params["u0"] = tuple(float(x) for x in params["u0"])
            p = TanRotParams(**params)
            if datum not in (None, "default"):
                raise UsageError("tanrot has no alternative data; use --u0")
            return _tanrot_problem(p, reference_h, T)
        if name == "lambdaomega":
            return _lambdaomega_problem(LambdaOmegaParams(**params), datum or "planar")
        if name == "sp":
            if "nu0" in params:
                params["nu0"] = int(params["nu0"])
            return _sp_problem(SchrodingerPoissonParams(**params), datum or "monokinetic")
    except TypeError as exc:
        raise UsageError(f"bad parameter for problem {name!r}: {exc}") from None
    raise UsageError(f"--problem must be one of {', '.join(PROBLEM_NAMES)}, got {name!r}")
