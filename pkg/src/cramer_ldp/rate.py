"""Rate functions as Legendre transforms, solved through the saddle equation.

The continuous-time rate function is

    I(u) = sup_{lam < Lambda} [lam * u - g_c(lam)],   I(0) = r * (1 - G(0+)),

and the i.i.d. one replaces g_c by log E exp(lam * xi) with I(0) = -log P(xi = 0).
The supremum is attained where the derivative of the cumulant equals ``u``.
That derivative is strictly increasing, so the root is bracketed by expanding
search and then polished by Newton steps with a bisection fallback.

The search runs on h(lam) = log g'(lam) - log u. When Lambda is finite the
variable is z = -log(Lambda - lam), which turns the pole at Lambda into linear
growth (exactly linear for exponential marks).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cumulant as cgf
from .cumulant import CompoundPoissonModel
from .errors import NumericError, UsageError
from .marks import MarkDistribution

_UNDERFLOW_EXPONENT = 745.0


class Branch(str, enum.Enum):
    INTERIOR = "Interior"
    ZERO_ATOM = "ZeroAtom"
    BOUNDARY_LINEAR = "BoundaryLinear"
    INFINITE = "Infinite"
    # i.i.d. case only: u sits on an atom at the edge of the mark support
    SUPPORT_EDGE = "SupportEdge"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SolverConfig:
    tol_lambda: float = 1e-12
    tol_residual: float = 1e-10
    max_iter: int = 200
    # None selects -745 / max(u, 1), where exp(lam * x) underflows for x >= 1
    lambda_floor: float | None = None

    def __post_init__(self):
        if not (self.tol_lambda > 0 and self.tol_residual > 0):
            raise UsageError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise UsageError("max_iter must be at least 1")
        if self.lambda_floor is not None and not self.lambda_floor < 0:
            raise UsageError("lambda_floor must be negative")

    def floor_for(self, u: float) -> float:
        if self.lambda_floor is not None:
            return self.lambda_floor
        return -_UNDERFLOW_EXPONENT / max(u, 1.0)


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class TiltBoundary:
    """Returned by :func:`solve_tilt` when no interior root is available.

    ``kind == "steepness"``: u lies at or beyond ``u_limit = g'(Lambda-)``, which
    is finite; ``lam`` is Lambda. ``kind == "floor"``: the root lies below the
    search floor ``lam``, where ``g'(lam) = u_limit`` still exceeds u.
    """

    kind: str
    lam: float
    u_limit: float


@dataclass(frozen=True)
class RateFunctionResult:
    u: float
    value: float
    lambda_star: float | None
    branch: Branch


@dataclass(frozen=True)
class _Conjugate:
    """A convex function through the pieces the solver needs."""

    value: Callable[[float], float]
    log_slope: Callable[[float], float]  # log g'(lam)
    dlog_slope: Callable[[float], float]  # d/dlam log g'(lam)
    lambda_max: float
    boundary_slope: float  # g'(Lambda-), inf when steep or Lambda infinite
    boundary_value: float  # g(Lambda-)


def _continuous(model: CompoundPoissonModel) -> _Conjugate:
    marks, r = model.marks, model.r
    log_r = math.log(r)
    lmax = marks.lambda_max
    return _Conjugate(
        value=lambda lam: cgf.cumulant(model, lam),
        log_slope=lambda lam: log_r + float(marks.log_moment(lam, 1)),
        dlog_slope=lambda lam: math.exp(marks.log_moment(lam, 2) - marks.log_moment(lam, 1)),
        lambda_max=lmax,
        boundary_slope=r * marks.boundary_moment(1) if math.isfinite(lmax) else math.inf,
        boundary_value=r * (marks.boundary_moment(0) - 1.0) if math.isfinite(lmax) else math.inf,
    )


def _discrete(dist: MarkDistribution) -> _Conjugate:
    lmax = dist.lambda_max

    def log_slope(lam):
        return float(dist.log_moment(lam, 1) - dist.log_moment(lam, 0))

    def dlog_slope(lam):
        l0, l1, l2 = (float(dist.log_moment(lam, k)) for k in (0, 1, 2))
        return math.exp(l2 - l1) - math.exp(l1 - l0)

    if math.isfinite(lmax):
        b0, b1 = dist.boundary_moment(0), dist.boundary_moment(1)
        bslope, bvalue = b1 / b0, math.log(b0)
    else:
        bslope = bvalue = math.inf
    return _Conjugate(
        value=lambda lam: cgf.discrete_logmgf(dist, lam),
        log_slope=log_slope,
        dlog_slope=dlog_slope,
        lambda_max=lmax,
        boundary_slope=bslope,
        boundary_value=bvalue,
    )


def _solve(fn: _Conjugate, u: float, cfg: SolverConfig) -> float | TiltBoundary:
    lmax = fn.lambda_max
    floor = cfg.floor_for(u)
    log_u = math.log(u)

    if math.isfinite(fn.boundary_slope) and u >= fn.boundary_slope:
        return TiltBoundary("steepness", lmax, fn.boundary_slope)

    if math.isfinite(lmax):
        def to_lam(z):
            return lmax - math.exp(-z)

        def to_z(lam):
            return -math.log(lmax - lam)

        def jac(z):  # dlam/dz
            return math.exp(-z)
    else:
        def to_lam(z):
            return z

        def to_z(lam):
            return lam

        def jac(z):
            return 1.0

    def h(z):
        return fn.log_slope(to_lam(z)) - log_u

    z0 = to_z(0.0)
    h0 = h(z0)
    if h0 == 0:
        return 0.0

    # Expanding search for a sign change of h.
    step = 1.0
    if h0 < 0:
        lo, h_lo = z0, h0
        for _ in range(2100):
            z = lo + step
            lam = to_lam(z)
            if lam >= lmax or not math.isfinite(lam):
                # closest representable point to Lambda still below the root
                raise NumericError(
                    f"saddle root for u={u!r} lies closer to the abscissa than floating point resolves",
                    (to_lam(lo), lmax),
                )
            hz = h(z)
            if hz >= 0:
                hi, h_hi = z, hz
                break
            lo, h_lo = z, hz
            step *= 2.0
        else:  # pragma: no cover - h grows without bound for supported laws
            raise NumericError(f"could not bracket the saddle root for u={u!r}", (to_lam(lo), math.inf))
    else:
        hi, h_hi = z0, h0
        z_floor = to_z(floor)
        while True:
            z = hi - step
            if z <= z_floor:
                hz = h(z_floor)
                if hz > 0:
                    return TiltBoundary("floor", floor, math.exp(hz + log_u))
                lo, h_lo = z_floor, hz
                break
            hz = h(z)
            if hz <= 0:
                lo, h_lo = z, hz
                break
            hi, h_hi = z, hz
            step *= 2.0

    if h_lo == 0:
        return to_lam(lo)
    if h_hi == 0:
        return to_lam(hi)

    # Safeguarded Newton in z; h is increasing, so the bracket keeps h(lo) < 0 < h(hi).
    z = lo if -h_lo < h_hi else hi
    hz = h_lo if z == lo else h_hi
    for _ in range(cfg.max_iter):
        lam = to_lam(z)
        slope = fn.dlog_slope(lam) * jac(z)
        newton = z - hz / slope if slope > 0 and math.isfinite(slope) else math.nan
        if lo < newton < hi:
            z_new = newton
        else:
            z_new = 0.5 * (lo + hi)
        lam_new = to_lam(z_new)
        step_lam = abs(lam_new - lam)
        z, hz = z_new, h(z_new)
        if hz == 0:
            return lam_new
        if hz < 0:
            lo = z
        else:
            hi = z
        resid_ok = abs(math.expm1(hz)) <= cfg.tol_residual
        lam_tol = max(cfg.tol_lambda, 4.0 * math.ulp(lam_new))
        if resid_ok and step_lam <= lam_tol:
            return lam_new
        width = to_lam(hi) - to_lam(lo)
        if width <= lam_tol and (resid_ok or width <= 2.0 * math.ulp(lam_new)):
            return lam_new
    raise NumericError(
        f"saddle equation for u={u!r} did not converge in {cfg.max_iter} iterations",
        (to_lam(lo), to_lam(hi)),
    )


def solve_tilt(
    model: CompoundPoissonModel, u: float, cfg: SolverConfig = DEFAULT_CONFIG
) -> float | TiltBoundary:
    """Root lam* of g_c'(lam) = u, or a :class:`TiltBoundary` report."""
    if not (u > 0 and math.isfinite(u)):
        raise UsageError(f"saddle equation needs finite u > 0, got {u!r}")
    if model.degenerate:
        raise UsageError("all marks are zero; S_t is identically 0 and no tilt reaches u > 0")
    return _solve(_continuous(model), float(u), cfg)


def rate_function(
    model: CompoundPoissonModel, u: float, cfg: SolverConfig = DEFAULT_CONFIG
) -> RateFunctionResult:
    """Continuous-time rate function I(u) of S_t."""
    if not u >= 0:
        raise UsageError(f"rate function needs u >= 0, got {u!r}")
    u = float(u)
    if u == 0:
        return RateFunctionResult(u, model.positive_jump_rate, None, Branch.ZERO_ATOM)
    if math.isinf(u) or model.degenerate:
        return RateFunctionResult(u, math.inf, None, Branch.INFINITE)

    sol = solve_tilt(model, u, cfg)
    if isinstance(sol, TiltBoundary):
        if sol.kind == "steepness":
            fn = _continuous(model)
            return RateFunctionResult(u, sol.lam * u - fn.boundary_value, sol.lam, Branch.BOUNDARY_LINEAR)
        # below the floor exp(lam * x) has underflowed; report the u -> 0 limit
        return RateFunctionResult(u, model.positive_jump_rate, sol.lam, Branch.INTERIOR)
    value = sol * u - cgf.cumulant(model, sol)
    return RateFunctionResult(u, max(value, 0.0), sol, Branch.INTERIOR)


def rate_function_discrete(
    dist: MarkDistribution, u: float, cfg: SolverConfig = DEFAULT_CONFIG
) -> RateFunctionResult:
    """Rate function of the i.i.d. sample mean of marks drawn from ``dist``."""
    if not u >= 0:
        raise UsageError(f"rate function needs u >= 0, got {u!r}")
    u = float(u)
    if u == 0:
        p0 = dist.atom_at_zero
        if p0 == 0:
            return RateFunctionResult(u, math.inf, None, Branch.INFINITE)
        return RateFunctionResult(u, max(-math.log(p0), 0.0), None, Branch.ZERO_ATOM)

    lo, hi = dist.support_min, dist.support_max
    if u < lo or u > hi:
        return RateFunctionResult(u, math.inf, None, Branch.INFINITE)
    if u == lo or u == hi:
        mass = dist.mass_at(u)
        value = -math.log(mass) if mass > 0 else math.inf
        return RateFunctionResult(u, max(value, 0.0), None, Branch.SUPPORT_EDGE)

    fn = _discrete(dist)
    sol = _solve(fn, u, cfg)
    if isinstance(sol, TiltBoundary):
        if sol.kind == "steepness":
            return RateFunctionResult(u, sol.lam * u - fn.boundary_value, sol.lam, Branch.BOUNDARY_LINEAR)
        # supremum restricted to lam >= floor: a lower bound on I(u)
        return RateFunctionResult(u, max(sol.lam * u - fn.value(sol.lam), 0.0), sol.lam, Branch.INTERIOR)
    value = sol * u - fn.value(sol)
    return RateFunctionResult(u, max(value, 0.0), sol, Branch.INTERIOR)


def closed_form_rate_exp_continuous(r: float, u: float) -> float:
    """(sqrt(r) - sqrt(u))**2, with value r at u = 0: Exponential(1) marks, jump rate r."""
    if not r > 0:
        raise UsageError(f"jump rate must be positive, got {r!r}")
    if not u >= 0:
        raise UsageError(f"u must be >= 0, got {u!r}")
    if u == 0:
        return float(r)
    return (math.sqrt(r) - math.sqrt(u)) ** 2


def closed_form_rate_exp_discrete(u: float) -> float:
    """u - 1 - log(u), infinite at u = 0: i.i.d. Exponential(1) marks."""
    if not u >= 0:
        raise UsageError(f"u must be >= 0, got {u!r}")
    if u == 0:
        return math.inf
    return u - 1.0 - math.log(u)


def brute_force_rate(model: CompoundPoissonModel, u: float, lam_grid) -> float:
    """max over the grid of lam * u - g_c(lam): a lower bound on I(u)."""
    grid = np.asarray(lam_grid, dtype=float).ravel()
    if grid.size == 0:
        raise UsageError("lambda grid is empty")
    if np.any(grid >= model.lambda_max):
        raise UsageError(
            f"lambda grid reaches {grid.max()!r}, not below the abscissa {model.lambda_max!r}"
        )
    return float(np.max(grid * u - cgf.cumulant(model, grid)))
