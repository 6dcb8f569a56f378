"""Exact extrapolation weights for affine combinations of Lie-Trotter chains.

All condition algebra runs on :class:`fractions.Fraction`; floats only appear
when a scheme is converted for the integrator (:meth:`SchemeSpec.float_weights`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial, prod

from .errors import ConditionViolation, IdentityViolation, UsageError

__all__ = [
    "Variant",
    "SchemeSpec",
    "CostMetrics",
    "ConditionTerm",
    "ConditionReport",
    "IdentityTerm",
    "IdentityReport",
    "solve_asymmetric",
    "solve_symmetric",
    "solve_linear_exact",
    "verify_order_conditions",
    "verify_combinatorial_identities",
    "step_counts",
    "scheme_for",
]


class Variant(enum.Enum):
    ASYMMETRIC_PLUS = "asym+"
    ASYMMETRIC_MINUS = "asym-"
    SYMMETRIC = "sym"

    @property
    def symmetric(self) -> bool:
        return self is Variant.SYMMETRIC


@dataclass(frozen=True)
class SchemeSpec:
    """An affine splitting scheme: variant, order and exact weights.

    ``gamma[m - 1]`` is the weight of the chain with ``m`` substeps.
    """

    variant: Variant
    order: int
    gamma: tuple[Fraction, ...]

    def __post_init__(self):
        gamma = tuple(Fraction(g) for g in self.gamma)
        object.__setattr__(self, "gamma", gamma)
        if self.order < 1:
            raise UsageError(f"order must be positive, got {self.order}")
        if self.variant.symmetric and self.order % 2:
            raise UsageError(f"symmetric schemes need an even order, got {self.order}")
        if not gamma:
            raise UsageError("a scheme needs at least one chain")

    @property
    def chains(self) -> int:
        return len(self.gamma)

    def float_weights(self) -> tuple[float, ...]:
        # Fraction.__float__ rounds once to nearest.
        return tuple(float(g) for g in self.gamma)

    @property
    def name(self) -> str:
        return f"{self.variant.value}{self.order}"


@dataclass(frozen=True)
class CostMetrics:
    total_steps: int
    parallel_steps: int


@dataclass(frozen=True)
class ConditionTerm:
    """One order-condition sum ``sum_m m**(-power) * gamma_m``."""

    power: int
    value: Fraction
    target: Fraction

    @property
    def residual(self) -> Fraction:
        return self.value - self.target


@dataclass(frozen=True)
class ConditionReport:
    spec: SchemeSpec
    terms: tuple[ConditionTerm, ...]

    @property
    def ok(self) -> bool:
        return all(t.residual == 0 for t in self.terms)


@dataclass(frozen=True)
class IdentityTerm:
    k: int
    r: int
    value: Fraction
    target: Fraction


@dataclass(frozen=True)
class IdentityReport:
    spec: SchemeSpec
    terms: tuple[IdentityTerm, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return all(t.value == t.target for t in self.terms)


def solve_linear_exact(matrix, rhs):
    """Solve a square system by Gauss-Jordan elimination over the rationals.

    Parameters
    ----------
    matrix : sequence of sequences
        Square coefficient matrix; entries are converted to ``Fraction``.
    rhs : sequence
        Right-hand side.

    Returns
    -------
    list of Fraction

    Raises
    ------
    UsageError
        If the matrix is not square or is singular.
    """
    n = len(rhs)
    a = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(matrix, rhs)]
    if len(a) != n or any(len(row) != n + 1 for row in a):
        raise UsageError("solve_linear_exact needs a square system")
    for col in range(n):
        pivot = next((i for i in range(col, n) if a[i][col] != 0), None)
        if pivot is None:
            raise UsageError("singular system")
        a[col], a[pivot] = a[pivot], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for i in range(n):
            if i != col and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[col])]
    return [row[n] for row in a]


def _asymmetric_product(q):
    return [prod((Fraction(m, m - j) for j in range(1, q + 1) if j != m), start=Fraction(1))
            for m in range(1, q + 1)]


def _symmetric_product(n):
    return [Fraction(1, 2) * prod((Fraction(m * m, m * m - j * j) for j in range(1, n + 1) if j != m),
                                  start=Fraction(1))
            for m in range(1, n + 1)]


def _condition_rows(variant, order):
    """(power, target) pairs of the order conditions."""
    if variant.symmetric:
        n = order // 2
        return [(0, Fraction(1, 2))] + [(2 * k, Fraction(0)) for k in range(1, n)]
    return [(0, Fraction(1))] + [(k, Fraction(0)) for k in range(1, order)]


def _exact_solve(variant, order, s):
    rows = _condition_rows(variant, order)
    matrix = [[Fraction(1, m ** p) for m in range(1, s + 1)] for p, _ in rows]
    return solve_linear_exact(matrix, [t for _, t in rows])


def solve_asymmetric(q: int, sign: str = "plus") -> SchemeSpec:
    """Weights of the order-``q`` asymmetric scheme with ``s = q`` chains.

    The closed-form Lagrange product is cross-checked against an exact
    solve of the Vandermonde system; a mismatch raises ``AssertionError``.
    """
    if q < 1:
        raise UsageError(f"order must be >= 1, got {q}")
    variant = _asym_variant(sign)
    gamma = _asymmetric_product(q)
    if gamma != _exact_solve(variant, q, q):
        raise AssertionError(f"product and linear-solve weights disagree for asymmetric q={q}")
    return SchemeSpec(variant, q, tuple(gamma))


def solve_symmetric(n: int) -> SchemeSpec:
    """Weights of the symmetric scheme of order ``2 n`` with ``s = n`` chain pairs.

    >>> solve_symmetric(2).gamma
    (Fraction(-1, 6), Fraction(2, 3))
    """
    if n < 1:
        raise UsageError(f"n must be >= 1, got {n}")
    gamma = _symmetric_product(n)
    if gamma != _exact_solve(Variant.SYMMETRIC, 2 * n, n):
        raise AssertionError(f"product and linear-solve weights disagree for symmetric n={n}")
    return SchemeSpec(Variant.SYMMETRIC, 2 * n, tuple(gamma))


def _asym_variant(sign):
    if sign in ("plus", "+", Variant.ASYMMETRIC_PLUS):
        return Variant.ASYMMETRIC_PLUS
    if sign in ("minus", "-", Variant.ASYMMETRIC_MINUS):
        return Variant.ASYMMETRIC_MINUS
    raise UsageError(f"sign must be 'plus' or 'minus', got {sign!r}")


def scheme_for(variant: str, order: int, sign: str = "plus") -> SchemeSpec:
    """Build a scheme from CLI-style names (``'sym'`` or ``'asym'``)."""
    if variant in ("sym", "symmetric", Variant.SYMMETRIC):
        if order < 2 or order % 2:
            raise UsageError(f"--order must be even and >= 2 for the symmetric variant, got {order}")
        return solve_symmetric(order // 2)
    if variant in ("asym", "asymmetric"):
        return solve_asymmetric(order, sign)
    if isinstance(variant, Variant):
        return solve_asymmetric(order, variant)
    raise UsageError(f"--variant must be 'sym' or 'asym', got {variant!r}")


def verify_order_conditions(spec: SchemeSpec) -> ConditionReport:
    """Evaluate every order-condition sum exactly.

    Raises
    ------
    ConditionViolation
        If any sum differs from its target.
    """
    terms = []
    for power, target in _condition_rows(spec.variant, spec.order):
        value = sum((Fraction(1, m ** power) * g for m, g in enumerate(spec.gamma, start=1)), Fraction(0))
        terms.append(ConditionTerm(power, value, target))
    report = ConditionReport(spec, tuple(terms))
    bad = [t for t in terms if t.residual != 0]
    if bad:
        t = bad[0]
        raise ConditionViolation(
            f"{spec.name}: sum of m^-{t.power} gamma_m is {t.value}, expected {t.target}")
    return report


def _identity_kernel(variant, m, k, r):
    if not variant.symmetric:
        return comb(m, r)
    sign = 1 if r == k or (k + r) % 2 == 0 else -1
    return comb(m, r) + sign * comb(m + r - 1, m - 1)


def verify_combinatorial_identities(spec: SchemeSpec) -> IdentityReport:
    """Check the binomial moment identities implied by the order conditions.

    For ``1 <= k <= q`` and ``1 <= r <= k`` the weighted sums
    ``sum_m c(m, k, r) m**(-k) gamma_m`` must vanish for ``r < k`` and equal
    ``1/k!`` for ``r = k``, where ``c = C(m, r)`` for asymmetric schemes and
    ``c = C(m, r) +/- C(m + r - 1, m - 1)`` for symmetric ones.
    """
    terms = []
    for k in range(1, spec.order + 1):
        for r in range(1, k + 1):
            value = sum((Fraction(_identity_kernel(spec.variant, m, k, r), m ** k) * g
                         for m, g in enumerate(spec.gamma, start=1)), Fraction(0))
            target = Fraction(1, factorial(k)) if r == k else Fraction(0)
            if value != target:
                raise IdentityViolation(k, r, value, target)
            terms.append(IdentityTerm(k, r, value, target))
    return IdentityReport(spec, tuple(terms))


def step_counts(spec: SchemeSpec) -> CostMetrics:
    """Total and critical-path counts of basic flow evaluations per step."""
    active = [m for m, g in enumerate(spec.gamma, start=1) if g != 0]
    factor = 4 if spec.variant.symmetric else 2
    return CostMetrics(total_steps=factor * sum(active), parallel_steps=2 * max(active))
