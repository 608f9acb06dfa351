"""Mark distributions on [0, inf): exponential moments, sampling and tilting.

Every family exposes the exponential moments

    M_k(lam) = int x**k * exp(lam * x) dG(x),   k in {0, 1, 2},

in closed form (or as a finite sum for ``Empirical``), so nothing in the
package needs quadrature. Moments accept scalars or numpy arrays of ``lam``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import DivergenceError, UsageError

_ORDERS = (0, 1, 2)


class MarkDistribution(ABC):
    """Law G of the nonnegative jump sizes."""

    @property
    @abstractmethod
    def lambda_max(self) -> float:
        """Abscissa of convergence: inf{lam > 0 : M_0(lam) = inf} (may be ``inf``)."""

    @property
    @abstractmethod
    def atom_at_zero(self) -> float:
        """P(xi = 0) = G(0+)."""

    @property
    @abstractmethod
    def support_min(self) -> float:
        ...

    @property
    @abstractmethod
    def support_max(self) -> float:
        ...

    @abstractmethod
    def mass_at(self, x: float) -> float:
        """Probability of the single point ``x``."""

    @abstractmethod
    def _moment(self, lam, order: int):
        ...

    @abstractmethod
    def _tilt(self, lam: float) -> "MarkDistribution":
        ...

    @abstractmethod
    def sample(self, rng: np.random.Generator, size=None):
        """Draw from G. Returns a float when ``size`` is None, else an ndarray."""

    @abstractmethod
    def to_spec(self) -> str:
        """CLI distribution string that parses back to an equal distribution."""

    def boundary_moment(self, order: int) -> float:
        """Left limit of M_order at a finite abscissa; ``inf`` for steep laws.

        Shipped families with finite abscissa are all steep. Subclasses whose
        moments stay finite at the abscissa override this.
        """
        return math.inf

    def log_moment(self, lam, order: int):
        """log M_order(lam) without the overflow of the plain moment; no domain check."""
        with np.errstate(divide="ignore"):
            return np.log(self._moment(lam, order))

    @property
    def mean(self) -> float:
        return float(self._moment(0.0, 1))

    def exponential_moment(self, lam, order: int = 0):
        return exponential_moment(self, lam, order)

    def tilt(self, lam: float) -> "MarkDistribution":
        return tilt(self, lam)


def _check_lambda(dist: MarkDistribution, lam) -> None:
    lmax = dist.lambda_max
    if np.any(np.asarray(lam) >= lmax) or np.any(np.isnan(lam)):
        raise DivergenceError(lam, lmax)


def exponential_moment(dist: MarkDistribution, lam, order: int = 0):
    """int x**order * exp(lam*x) dG(x) for lam strictly below ``dist.lambda_max``."""
    if order not in _ORDERS:
        raise UsageError(f"moment order must be one of {_ORDERS}, got {order!r}")
    _check_lambda(dist, lam)
    out = dist._moment(lam, order)
    if np.ndim(out) == 0:
        return float(out)
    return out


def sample_mark(dist: MarkDistribution, rng: np.random.Generator) -> float:
    return float(dist.sample(rng))


def tilt(dist: MarkDistribution, lam: float) -> MarkDistribution:
    """Exponentially tilted law exp(lam*x) dG(x) / M_0(lam)."""
    _check_lambda(dist, lam)
    if lam == 0:
        return dist
    return dist._tilt(float(lam))


@dataclass(frozen=True)
class Exponential(MarkDistribution):
    """Exponential law with mean ``theta``."""

    theta: float

    def __post_init__(self):
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise UsageError(f"exponential mean must be positive and finite, got {self.theta!r}")

    @property
    def lambda_max(self) -> float:
        return 1.0 / self.theta

    @property
    def atom_at_zero(self) -> float:
        return 0.0

    @property
    def support_min(self) -> float:
        return 0.0

    @property
    def support_max(self) -> float:
        return math.inf

    def mass_at(self, x: float) -> float:
        return 0.0

    def _moment(self, lam, order):
        theta = self.theta
        a = 1.0 - np.asarray(lam, dtype=float) * theta
        if order == 0:
            return 1.0 / a
        if order == 1:
            return theta / a**2
        return 2.0 * theta**2 / a**3

    def log_moment(self, lam, order):
        k, theta = 1.0, self.theta
        log_a = np.log1p(-np.asarray(lam, dtype=float) * theta)
        coef = (1.0, k * theta, k * (k + 1) * theta**2)[order]
        return math.log(coef) - (k + order) * log_a

    def _tilt(self, lam):
        return Exponential(self.theta / (1.0 - lam * self.theta))

    def sample(self, rng, size=None):
        return rng.exponential(self.theta, size)

    def to_spec(self) -> str:
        return f"exp:{self.theta!r}"


@dataclass(frozen=True)
class Gamma(MarkDistribution):
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise UsageError(f"gamma shape must be positive, got {self.shape!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise UsageError(f"gamma scale must be positive, got {self.scale!r}")

    @property
    def lambda_max(self) -> float:
        return 1.0 / self.scale

    @property
    def atom_at_zero(self) -> float:
        return 0.0

    @property
    def support_min(self) -> float:
        return 0.0

    @property
    def support_max(self) -> float:
        return math.inf

    def mass_at(self, x: float) -> float:
        return 0.0

    def _moment(self, lam, order):
        k, theta = self.shape, self.scale
        a = 1.0 - np.asarray(lam, dtype=float) * theta
        if order == 0:
            return a ** (-k)
        if order == 1:
            return k * theta * a ** (-k - 1)
        return k * (k + 1) * theta**2 * a ** (-k - 2)

    def log_moment(self, lam, order):
        k, theta = self.shape, self.scale
        log_a = np.log1p(-np.asarray(lam, dtype=float) * theta)
        coef = (1.0, k * theta, k * (k + 1) * theta**2)[order]
        return math.log(coef) - (k + order) * log_a

    def _tilt(self, lam):
        return Gamma(self.shape, self.scale / (1.0 - lam * self.scale))

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, self.scale, size)

    def to_spec(self) -> str:
        return f"gamma:{self.shape!r}:{self.scale!r}"


@dataclass(frozen=True)
class PointMass(MarkDistribution):
    value: float

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise UsageError(f"point mass location must be finite and >= 0, got {self.value!r}")

    @property
    def lambda_max(self) -> float:
        return math.inf

    @property
    def atom_at_zero(self) -> float:
        return 1.0 if self.value == 0 else 0.0

    @property
    def support_min(self) -> float:
        return self.value

    @property
    def support_max(self) -> float:
        return self.value

    def mass_at(self, x: float) -> float:
        return 1.0 if x == self.value else 0.0

    def _moment(self, lam, order):
        c = self.value
        return c**order * np.exp(np.asarray(lam, dtype=float) * c)

    def log_moment(self, lam, order):
        c = self.value
        with np.errstate(divide="ignore"):
            return np.log(c**order) + np.asarray(lam, dtype=float) * c

    def _tilt(self, lam):
        return self

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value, dtype=float)

    def to_spec(self) -> str:
        return f"point:{self.value!r}"


@dataclass(frozen=True)
class ZeroInflated(MarkDistribution):
    """Mixture p0 * delta_0 + (1 - p0) * base, where ``base`` has no atom at zero."""

    p0: float
    base: MarkDistribution

    def __post_init__(self):
        if not (0.0 <= self.p0 <= 1.0):
            raise UsageError(f"zero-inflation probability must lie in [0, 1], got {self.p0!r}")
        if self.base.atom_at_zero != 0:
            raise UsageError("zero-inflated base distribution must not have an atom at zero")

    @property
    def lambda_max(self) -> float:
        return self.base.lambda_max

    @property
    def atom_at_zero(self) -> float:
        return self.p0

    @property
    def support_min(self) -> float:
        if self.p0 > 0:
            return 0.0
        return self.base.support_min

    @property
    def support_max(self) -> float:
        if self.p0 == 1:
            return 0.0
        return self.base.support_max

    def mass_at(self, x: float) -> float:
        if x == 0:
            return self.p0
        return (1.0 - self.p0) * self.base.mass_at(x)

    def _moment(self, lam, order):
        base = (1.0 - self.p0) * self.base._moment(lam, order)
        if order == 0:
            return self.p0 + base
        return base

    def log_moment(self, lam, order):
        with np.errstate(divide="ignore"):
            base = np.log1p(-self.p0) + self.base.log_moment(lam, order)
            if order == 0:
                return np.logaddexp(np.log(self.p0), base)
        return base

    def boundary_moment(self, order: int) -> float:
        b = (1.0 - self.p0) * self.base.boundary_moment(order)
        return self.p0 + b if order == 0 else b

    def _tilt(self, lam):
        norm = float(self._moment(lam, 0))
        return ZeroInflated(self.p0 / norm, self.base._tilt(lam))

    def sample(self, rng, size=None):
        u = rng.random(size)
        x = self.base.sample(rng, size)
        if size is None:
            return 0.0 if u < self.p0 else float(x)
        return np.where(u < self.p0, 0.0, x)

    def to_spec(self) -> str:
        return f"zeroinf:{self.p0!r}:{self.base.to_spec()}"


@dataclass(frozen=True)
class Empirical(MarkDistribution):
    """Finitely supported law: ``values[i]`` with probability ``weights[i]``."""

    values: tuple[float, ...]
    weights: tuple[float, ...]
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        weights = tuple(float(w) for w in self.weights)
        if not values:
            raise UsageError("empirical distribution needs at least one value")
        if len(values) != len(weights):
            raise UsageError("empirical values and weights differ in length")
        if any(not (v >= 0 and math.isfinite(v)) for v in values):
            raise UsageError("empirical values must be finite and >= 0")
        if any(not (w >= 0) for w in weights):
            raise UsageError("empirical weights must be >= 0")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise UsageError(f"empirical weights sum to {math.fsum(weights)!r}, not 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, values, source: str | None = None) -> "Empirical":
        values = [float(v) for v in values]
        n = len(values)
        return cls(tuple(values), tuple([1.0 / n] * n) if n else (), source)

    @classmethod
    def from_file(cls, path) -> "Empirical":
        """One nonnegative value per line, uniform weights; blank lines skipped."""
        values = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            token = line.strip()
            if not token:
                continue
            try:
                values.append(float(token))
            except ValueError:
                raise UsageError(f"{path}:{lineno}: not a number: {token!r}") from None
        if not values:
            raise UsageError(f"{path}: no values")
        return cls.uniform(values, source=str(path))

    @property
    def _support(self) -> np.ndarray:
        return np.array([v for v, w in zip(self.values, self.weights) if w > 0])

    @property
    def lambda_max(self) -> float:
        return math.inf

    @property
    def atom_at_zero(self) -> float:
        return math.fsum(w for v, w in zip(self.values, self.weights) if v == 0)

    @property
    def support_min(self) -> float:
        return float(self._support.min())

    @property
    def support_max(self) -> float:
        return float(self._support.max())

    def mass_at(self, x: float) -> float:
        return math.fsum(w for v, w in zip(self.values, self.weights) if v == x)

    def _moment(self, lam, order):
        x = np.asarray(self.values)
        w = np.asarray(self.weights) * x**order
        lam = np.asarray(lam, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(np.multiply.outer(lam, x)) @ w

    def log_moment(self, lam, order):
        x = np.asarray(self.values)
        with np.errstate(divide="ignore"):
            logw = np.log(np.asarray(self.weights))
            if order:
                logw = logw + order * np.log(x)
        return logsumexp(np.multiply.outer(np.asarray(lam, dtype=float), x) + logw, axis=-1)

    def _tilt(self, lam):
        x = np.asarray(self.values)
        with np.errstate(divide="ignore"):
            logw = np.log(np.asarray(self.weights)) + lam * x
        logw -= logw.max()
        w = np.exp(logw)
        w /= w.sum()
        return Empirical(self.values, tuple(w.tolist()), self.source)

    def sample(self, rng, size=None):
        out = rng.choice(np.asarray(self.values), size=size, p=np.asarray(self.weights))
        return float(out) if size is None else out

    def to_spec(self) -> str:
        if self.source is None:
            raise UsageError("empirical distribution was not loaded from a file; no spec string")
        return f"emp:{self.source}"


def parse_dist(spec: str) -> MarkDistribution:
    """Parse ``exp:<mean>``, ``gamma:<k>:<scale>``, ``point:<c>``,
    ``zeroinf:<p0>:<spec>`` or ``emp:<path>``."""
    kind, _, rest = spec.strip().partition(":")

    def num(token: str) -> float:
        try:
            return float(token)
        except ValueError:
            raise UsageError(f"bad number {token!r} in distribution spec {spec!r}") from None

    if kind == "exp":
        return Exponential(num(rest))
    if kind == "gamma":
        parts = rest.split(":")
        if len(parts) != 2:
            raise UsageError(f"gamma spec needs <shape>:<scale>, got {rest!r}")
        return Gamma(num(parts[0]), num(parts[1]))
    if kind == "point":
        return PointMass(num(rest))
    if kind == "zeroinf":
        p0, sep, base = rest.partition(":")
        if not sep:
            raise UsageError(f"zeroinf spec needs <p0>:<spec>, got {rest!r}")
        return ZeroInflated(num(p0), parse_dist(base))
    if kind == "emp":
        if not rest:
            raise UsageError("emp spec needs a file path")
        return Empirical.from_file(rest)
    raise UsageError(f"unknown distribution family {kind!r} in {spec!r}")
