"""Probability estimates for events of S_t and large-deviation diagnostics.

Importance sampling draws paths from the exponentially tilted law at the
saddle point lam* of the target level u, then reweights each path by the
inverse density exp(-(lam* t S_t - t g_c(lam*))). Weights are handled in log
space, so estimates far below the double-precision range still yield a finite
decay rate -(1/t) log p.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import cumulant as cgf
from .cumulant import CompoundPoissonModel
from .errors import UsageError
from .rate import DEFAULT_CONFIG, SolverConfig, TiltBoundary, rate_function, solve_tilt
from .simulate import simulate_paths, tilted_model


class Method(str, enum.Enum):
    CRUDE_MC = "CrudeMC"
    IMPORTANCE_SAMPLING = "ImportanceSampling"
    EXACT = "Exact"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class EventWindow:
    """The closed event |S_t - u| <= delta."""

    u: float
    delta: float

    def __post_init__(self):
        if not self.u >= 0:
            raise UsageError(f"window centre must be >= 0, got {self.u!r}")
        if not self.delta > 0:
            raise UsageError(f"window half-width must be positive, got {self.delta!r}")

    def contains(self, s):
        return np.abs(np.asarray(s) - self.u) <= self.delta


@dataclass(frozen=True)
class TailEvent:
    """The event S_t > j."""

    j: float

    def contains(self, s):
        return np.asarray(s) > self.j


class SaddleBoundaryError(UsageError):
    """The tilt for the requested level is not an interior saddle point."""

    def __init__(self, report: TiltBoundary, u: float):
        self.report = report
        super().__init__(
            f"no interior tilt for u={u!r}: {report.kind} boundary at lambda={report.lam!r} "
            f"(derivative limit {report.u_limit!r})"
        )


@dataclass(frozen=True)
class EstimateResult:
    method: Method
    p_hat: float
    std_err: float
    n_paths: int
    t: float
    log_decay: float | None
    log_decay_std_err: float | None = None
    u: float | None = None
    delta: float | None = None
    seed: int | None = None
    lambda_star: float | None = None

    def to_record(self) -> dict:
        return {
            "method": str(self.method),
            "u": self.u,
            "delta": self.delta,
            "t": self.t,
            "n": self.n_paths,
            "seed": self.seed,
            "p_hat": self.p_hat,
            "std_err": self.std_err,
            "log_decay": self.log_decay,
        }


def _event_fields(event) -> tuple[float | None, float | None]:
    if isinstance(event, EventWindow):
        return event.u, event.delta
    if isinstance(event, TailEvent):
        return event.j, None
    return None, None


def mc_probability(
    model: CompoundPoissonModel, event, t: float, n: int, seed: int = 0, workers: int = 1
) -> EstimateResult:
    """Crude Monte Carlo frequency of ``event`` over ``n`` nominal paths."""
    batch = simulate_paths(model, t, n, seed, workers, keep_jumps=False)
    hits = int(np.count_nonzero(event.contains(batch.s_t)))
    p = hits / n
    se = math.sqrt(p * (1.0 - p) / n)
    u, delta = _event_fields(event)
    decay = decay_se = None
    if hits:
        decay = 0.0 - math.log(p) / t
        decay_se = se / (t * p)
    return EstimateResult(Method.CRUDE_MC, p, se, n, float(t), decay, decay_se, u, delta, seed)


def is_probability(
    model: CompoundPoissonModel,
    window: EventWindow,
    t: float,
    n: int,
    seed: int = 0,
    workers: int = 1,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> EstimateResult:
    """Importance-sampling estimate of P(|S_t - u| <= delta) under the tilt at u.

    A window that already contains the process mean is sampled untilted.
    """
    if not window.u > 0:
        raise UsageError("importance sampling needs a window centre u > 0")
    if bool(window.contains(model.mean)):
        # typical event: tilting towards u would only inflate the weight variance
        lam = 0.0
    else:
        lam = solve_tilt(model, window.u, cfg)
        if isinstance(lam, TiltBoundary):
            raise SaddleBoundaryError(lam, window.u)

    batch = simulate_paths(tilted_model(model, lam), t, n, seed, workers, keep_jumps=False)
    hit = window.contains(batch.s_t)
    u, delta = window.u, window.delta
    if not hit.any():
        return EstimateResult(Method.IMPORTANCE_SAMPLING, 0.0, 0.0, n, float(t), None, None, u, delta, seed, lam)

    log_w = t * cgf.cumulant(model, lam) - lam * batch.totals
    shift = float(log_w[hit].max())
    scaled = np.where(hit, np.exp(np.where(hit, log_w - shift, 0.0)), 0.0)
    mean = float(scaled.mean())
    sd = float(scaled.std(ddof=1)) if n > 1 else 0.0

    log_p = shift + math.log(mean)
    p = math.exp(log_p)
    se = math.exp(shift + math.log(sd)) / math.sqrt(n) if sd > 0 else 0.0
    decay = 0.0 - log_p / t
    decay_se = sd / (mean * math.sqrt(n) * t)
    return EstimateResult(Method.IMPORTANCE_SAMPLING, p, se, n, float(t), decay, decay_se, u, delta, seed, lam)


def zero_probability(model: CompoundPoissonModel, t: float) -> EstimateResult:
    """P(S_t = 0) = exp(-t r (1 - G(0+))): no strictly positive mark arrives by t."""
    if not t > 0:
        raise UsageError(f"horizon must be positive, got {t!r}")
    rate = model.positive_jump_rate
    return EstimateResult(Method.EXACT, math.exp(-t * rate), 0.0, 0, float(t), rate, 0.0, 0.0, None, None)


def chernoff_tail_bound(
    model: CompoundPoissonModel,
    j: float,
    t: float,
    lam: float | None = None,
    optimal: bool = False,
) -> float:
    """Upper bound min(1, exp(t * (g_c(lam) - lam * j))) on P(S_t > j).

    Without ``lam`` the tilt is Lambda / 2 when Lambda is finite, and the
    saddle point of j otherwise (or when ``optimal`` is set).
    """
    if not j > 0:
        raise UsageError(f"tail level must be positive, got {j!r}")
    if not t > 0:
        raise UsageError(f"horizon must be positive, got {t!r}")
    lmax = model.lambda_max
    if lam is None:
        if optimal or math.isinf(lmax):
            if j <= model.mean:
                return 1.0
            # optimised exponent is the rate function itself
            return math.exp(-t * rate_function(model, j).value)
        else:
            lam = 0.5 * lmax
    if not 0 < lam < lmax:
        raise UsageError(f"Chernoff tilt must lie in (0, {lmax!r}), got {lam!r}")
    exponent = t * (cgf.cumulant(model, lam) - lam * j)
    return 1.0 if exponent >= 0 else math.exp(exponent)


@dataclass(frozen=True)
class LaplaceEstimate:
    mean: float
    std_err: float
    exact: float
    n_paths: int


def empirical_laplace(
    model: CompoundPoissonModel, lam: float, t: float, n: int, seed: int = 0, workers: int = 1
) -> LaplaceEstimate:
    """Sample mean of exp(lam * t * S_t) over nominal paths, against the exact value.

    Restricted to lam < Lambda / 2, where the estimator has finite variance.
    """
    if not lam < 0.5 * model.lambda_max:
        raise UsageError(
            f"lambda={lam!r} is not below Lambda/2={0.5 * model.lambda_max!r}: "
            "exp(lam t S_t) would have infinite variance; use laplace_transform instead"
        )
    batch = simulate_paths(model, t, n, seed, workers, keep_jumps=False)
    values = np.exp(lam * batch.totals)
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    return LaplaceEstimate(float(values.mean()), sd / math.sqrt(n), cgf.laplace_transform(model, lam, t), n)


def martingale_mean(
    model: CompoundPoissonModel, lam: float, t: float, n: int, seed: int = 0, workers: int = 1
) -> tuple[float, float]:
    """Mean and standard error of exp(lam t S_t - t g_c(lam)) over nominal paths."""
    batch = simulate_paths(model, t, n, seed, workers, keep_jumps=False)
    values = np.exp(lam * batch.totals - t * cgf.cumulant(model, lam))
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    return float(values.mean()), sd / math.sqrt(n)


def decay_rate_curve(
    model: CompoundPoissonModel,
    window: EventWindow,
    t_grid,
    n: int,
    seed: int = 0,
    workers: int = 1,
) -> list[tuple[float, float | None, float | None]]:
    """(t, -(1/t) log p_hat, its delta-method std-err) along an increasing horizon grid."""
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise UsageError("horizon grid is empty")
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise UsageError("horizon grid must be strictly increasing")
    out = []
    for t in t_grid:
        res = is_probability(model, window, t, n, seed, workers)
        out.append((t, res.log_decay, res.log_decay_std_err))
    return out
