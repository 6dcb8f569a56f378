"""High-order splitting integrators with positive steps only.

Methods of any order are built as affine combinations of Lie-Trotter chains
with exact rational weights, so they apply to irreversible problems whose
linear part only generates a forward semigroup.
"""

from .coeffs import (CostMetrics, SchemeSpec, Variant, scheme_for, solve_asymmetric,
                     solve_symmetric, step_counts, verify_combinatorial_identities,
                     verify_order_conditions)
from .core import (FlowPair, Sign, SplittingMethod, Trajectory, affine_step, chain_eval,
                   estimate_lipschitz, integrate, lie_step, strang_step)
from .errors import (ConditionViolation, DegenerateInput, IdentityViolation, InsufficientData,
                     NumericFailure, PossplitError, SymmetryViolation, TanDomain, UsageError)
from .harness import convergence_study, decay_monitor, fit_order, global_errors
from .problems import make_problem
from .spectral import PeriodicGrid

__version__ = "0.1.0"

__all__ = [
    "CostMetrics", "SchemeSpec", "Variant", "scheme_for", "solve_asymmetric", "solve_symmetric",
    "step_counts", "verify_combinatorial_identities", "verify_order_conditions",
    "FlowPair", "Sign", "SplittingMethod", "Trajectory", "affine_step", "chain_eval",
    "estimate_lipschitz", "integrate", "lie_step", "strang_step",
    "ConditionViolation", "DegenerateInput", "IdentityViolation", "InsufficientData",
    "NumericFailure", "PossplitError", "SymmetryViolation", "TanDomain", "UsageError",
    "convergence_study", "decay_monitor", "fit_order", "global_errors",
    "make_problem", "PeriodicGrid",
]
