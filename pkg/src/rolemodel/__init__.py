"""Estimator distillation for degraded observations.

Train a cheap estimator that sees only a degraded statistic Z by minimizing
its expected divergence from a reference ("role model") estimator that sees
the richer observation Y. The non-parametric solution is per-bin averaging
of the reference posteriors; the parametric path optimizes a small vector of
correction weights. Two testbeds are included: min-sum check-node
post-processing and a soft-sudoku belief-propagation solver built on matrix
permanents.
"""

__version__ = "0.1.0"

from .errors import (
    AbsoluteContinuityViolation,
    BinOutOfRange,
    BisectionFailure,
    DegenerateRow,
    DimensionMismatch,
    DimensionTooLarge,
    RoleModelError,
    ZeroMassAtTruth,
    ZeroProbabilityConditioning,
)
from .probs import Distribution, dist_to_llr, divergence, entropy, llr_to_dist, soft_mi

__all__ = [
    "AbsoluteContinuityViolation",
    "BinOutOfRange",
    "BisectionFailure",
    "DegenerateRow",
    "DimensionMismatch",
    "DimensionTooLarge",
    "Distribution",
    "RoleModelError",
    "ZeroMassAtTruth",
    "ZeroProbabilityConditioning",
    "dist_to_llr",
    "divergence",
    "entropy",
    "llr_to_dist",
    "soft_mi",
    "__version__",
]
