"""Pseudospectral tools on odd periodic grids.

The DFT follows the convention ``U_hat[nu] = (1/eta) sum_r U[r] exp(-2 pi i r nu / eta)``,
so ``U[r] = sum_nu U_hat[nu] exp(2 pi i r nu / eta)``.  Mode ``nu > l`` stands for the
signed wavenumber ``nu - eta``; linear flows act on each mode through its
squared physical wavenumber ``a**2 * lambda_nu``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import SymmetryViolation, UsageError

__all__ = [
    "PeriodicGrid",
    "FourierKernel",
    "SemigroupFlow",
    "dft_forward",
    "dft_inverse",
    "aliased_eigenvalue",
    "apply_semigroup",
    "convolve",
    "poisson_kernel",
    "grid_csv",
]


@dataclass(frozen=True)
class PeriodicGrid:
    """``eta`` equispaced nodes ``x_r = L r / eta`` on a period ``L``."""

    eta: int
    period: float = 2 * np.pi

    def __post_init__(self):
        if int(self.eta) != self.eta or self.eta < 3 or self.eta % 2 == 0:
            raise UsageError(f"--eta must be an odd integer >= 3, got {self.eta}")
        if not self.period > 0:
            raise UsageError(f"period must be positive, got {self.period}")

    @property
    def l(self) -> int:
        return (self.eta - 1) // 2

    @property
    def a(self) -> float:
        """Base wavenumber ``2 pi / L``."""
        return 2 * np.pi / self.period

    @property
    def dx(self) -> float:
        return self.period / self.eta

    @cached_property
    def x(self) -> np.ndarray:
        return self.period * np.arange(self.eta) / self.eta

    @cached_property
    def modes(self) -> np.ndarray:
        """Signed integer wavenumber represented by each DFT index."""
        nu = np.arange(self.eta)
        return np.where(nu <= self.l, nu, nu - self.eta)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.array([aliased_eigenvalue(nu, self) for nu in range(self.eta)], dtype=float)

    @cached_property
    def k2(self) -> np.ndarray:
        """Squared physical wavenumbers ``a**2 * lambda_nu``."""
        return self.a ** 2 * self.eigenvalues

    def norm(self, u) -> float:
        """Discrete L2 norm ``sqrt((L/eta) sum |U_r|**2)``."""
        u = np.asarray(u)
        return float(np.sqrt(self.dx * np.vdot(u, u).real))

    def check(self, u):
        if np.shape(u) != (self.eta,):
            raise UsageError(f"grid function must have {self.eta} samples, got shape {np.shape(u)}")


def dft_forward(grid: PeriodicGrid, samples) -> np.ndarray:
    samples = np.asarray(samples)
    grid.check(samples)
    return np.fft.fft(samples) / grid.eta


def dft_inverse(grid: PeriodicGrid, coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs)
    grid.check(coeffs)
    return np.fft.ifft(coeffs) * grid.eta


def aliased_eigenvalue(nu: int, grid: PeriodicGrid) -> int:
    """Squared signed wavenumber of DFT index ``nu``: ``nu**2`` up to ``l``, else ``(eta - nu)**2``."""
    if not 0 <= nu < grid.eta:
        raise UsageError(f"mode index must lie in [0, {grid.eta - 1}], got {nu}")
    return nu * nu if nu <= grid.l else (grid.eta - nu) ** 2


def apply_semigroup(grid: PeriodicGrid, symbol: Callable, h, u) -> np.ndarray:
    """Apply a Fourier multiplier.

    ``symbol(k2, h)`` receives the array of squared physical wavenumbers and
    returns the per-mode factors.
    """
    if h < 0:
        raise UsageError(f"semigroups are only defined for h >= 0, got {h}")
    return dft_inverse(grid, symbol(grid.k2, h) * dft_forward(grid, u))


class SemigroupFlow:
    """Linear flow ``exp(h L)`` of a diagonal generator, as a ``(h, u)`` callable.

    ``generator(k2)`` gives the eigenvalue of ``L`` on each mode.  Factor
    arrays are cached per step size; the cache is lock-protected so chain
    workers may share one instance.
    """

    def __init__(self, grid: PeriodicGrid, generator: Callable):
        self.grid = grid
        self.spectrum = np.asarray(generator(grid.k2), dtype=complex)
        self._cache = {}
        self._lock = threading.Lock()

    def factors(self, h) -> np.ndarray:
        f = self._cache.get(h)
        if f is None:
            f = np.exp(h * self.spectrum)
            with self._lock:
                if len(self._cache) > 256:
                    self._cache.clear()
                self._cache[h] = f
        return f

    def symbol(self, k2, h):
        return self.factors(h)

    def __call__(self, h, u):
        return apply_semigroup(self.grid, self.symbol, h, u)


@dataclass(frozen=True)
class FourierKernel:
    """Real kernel given by its coefficients on the DFT indices of a grid."""

    grid: PeriodicGrid
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        self.grid.check(c)
        object.__setattr__(self, "coefficients", c)

    def __getitem__(self, mode: int) -> float:
        """Coefficient of signed wavenumber ``mode``."""
        return float(self.coefficients[mode % self.grid.eta])


def poisson_kernel(grid: PeriodicGrid, lam: float) -> FourierKernel:
    """Kernel ``sinh(lam) / (cosh(lam) - cos x)``, with coefficients ``exp(-lam |nu|)``."""
    if not lam > 0:
        raise UsageError(f"--lambda must be positive, got {lam}")
    return FourierKernel(grid, np.exp(-lam * np.abs(grid.modes)))


def convolve(grid: PeriodicGrid, kernel: FourierKernel, rho) -> np.ndarray:
    """Periodic convolution of a real grid function with ``kernel``.

    Raises
    ------
    SymmetryViolation
        If the discarded imaginary part exceeds ``1e-12 * ||rho||``.
    """
    rho = np.asarray(rho)
    if np.iscomplexobj(rho):
        if np.any(rho.imag != 0):
            raise UsageError("convolve expects a real density")
        rho = rho.real
    out = dft_inverse(grid, kernel.coefficients * dft_forward(grid, rho))
    if grid.norm(out.imag) > 1e-12 * grid.norm(rho):
        raise SymmetryViolation(
            f"convolution imaginary part {grid.norm(out.imag):.3e} exceeds tolerance")
    return out.real


def grid_csv(grid: PeriodicGrid, u) -> str:
    """Serialize a grid function as ``x,re,im`` rows."""
    u = np.asarray(u, dtype=complex)
    grid.check(u)
    lines = ["x,re,im"]
    lines += [f"{x:.17g},{z.real:.17g},{z.imag:.17g}" for x, z in zip(grid.x, u)]
    return "\n".join(lines) + "\n"
