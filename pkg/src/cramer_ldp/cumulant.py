"""Compound Poisson cumulant and the i.i.d. log moment generating function.

For a compound Poisson process with jump rate ``r`` and mark law G,

    log E exp(lam * t * S_t) = t * r * (M_0(lam) - 1),

so the per-unit-time cumulant is ``g_c(lam) = r * (M_0(lam) - 1)`` and its
derivatives are ``r * M_k(lam)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .marks import MarkDistribution, exponential_moment


@dataclass(frozen=True)
class CompoundPoissonModel:
    """Jump rate ``r`` (events per unit time) and mark law ``marks``.

    The compensator of the jump measure is ``r ds dG(x)``.
    """

    r: float
    marks: MarkDistribution

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise UsageError(f"jump rate must be positive and finite, got {self.r!r}")

    @property
    def lambda_max(self) -> float:
        return self.marks.lambda_max

    @property
    def mean(self) -> float:
        """E S_t = r * E xi, for every t."""
        return self.r * self.marks.mean

    @property
    def positive_jump_rate(self) -> float:
        """Rate of the counter of strictly positive marks, r * (1 - G(0+))."""
        return self.r * (1.0 - self.marks.atom_at_zero)

    @property
    def degenerate(self) -> bool:
        """True when every mark is zero, so S_t is identically 0."""
        return self.marks.atom_at_zero == 1.0


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def cumulant(model: CompoundPoissonModel, lam):
    """g_c(lam) = r * int (exp(lam*x) - 1) dG(x)."""
    return _scalar(model.r * (exponential_moment(model.marks, lam, 0) - 1.0))


def cumulant_derivative(model: CompoundPoissonModel, lam, order: int = 1):
    if order not in (1, 2):
        raise UsageError(f"cumulant derivative order must be 1 or 2, got {order!r}")
    return _scalar(model.r * exponential_moment(model.marks, lam, order))


def laplace_transform(model: CompoundPoissonModel, lam: float, t: float) -> float:
    """E exp(lam * t * S_t)."""
    if not t > 0:
        raise UsageError(f"horizon must be positive, got {t!r}")
    return math.exp(t * cumulant(model, lam))


def discrete_logmgf(dist: MarkDistribution, lam):
    """log E exp(lam * xi_1), the i.i.d. log moment generating function."""
    return _scalar(np.log(exponential_moment(dist, lam, 0)))
