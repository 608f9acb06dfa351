"""Desk-scale self checks run by ``cramer-ldp validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import cumulant as cgf
from . import estimate as est
from . import rate as rt
from .cumulant import CompoundPoissonModel
from .marks import Empirical, Exponential, Gamma, PointMass, ZeroInflated
from .simulate import simulate_paths, simulate_tilted_paths


@dataclass(frozen=True)
class Check:
    name: str
    target: str
    observed: str
    tolerance: str
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name}  target={self.target}  observed={self.observed}  tol={self.tolerance}"


def _g(x) -> str:
    return f"{x:.10g}"


def check_closed_form_continuous() -> list[Check]:
    worst = 0.0
    zero_ok = True
    for r in (0.5, 1.0, 2.0):
        model = CompoundPoissonModel(r, Exponential(1.0))
        for k in range(1, 81):
            u = 0.05 * k
            diff = abs(rt.rate_function(model, u).value - rt.closed_form_rate_exp_continuous(r, u))
            worst = max(worst, diff)
        zero_ok &= rt.rate_function(model, 0.0).value == r
    return [
        Check("closed-form I^c (sqrt(r)-sqrt(u))^2", "0", _g(worst), "1e-08", worst <= 1e-8),
        Check("I^c(0) = r", "r", "exact" if zero_ok else "mismatch", "0", zero_ok),
    ]


def check_closed_form_discrete() -> list[Check]:
    dist = Exponential(1.0)
    worst = max(
        abs(rt.rate_function_discrete(dist, 0.1 * k).value - rt.closed_form_rate_exp_discrete(0.1 * k))
        for k in range(1, 41)
    )
    at_zero = rt.rate_function_discrete(dist, 0.0)
    return [
        Check("closed-form I^d u-1-log(u)", "0", _g(worst), "1e-08", worst <= 1e-8),
        Check("I^d(0) = inf", "inf", _g(at_zero.value), "exact", math.isinf(at_zero.value)),
    ]


def random_case(rng: np.random.Generator) -> tuple[CompoundPoissonModel, float]:
    """Random (marks, r, u) with the saddle point comfortably away from Lambda."""
    family = rng.integers(5)
    if family == 0:
        marks = Exponential(float(rng.uniform(0.3, 3.0)))
    elif family == 1:
        marks = Gamma(float(rng.uniform(0.5, 4.0)), float(rng.uniform(0.3, 2.0)))
    elif family == 2:
        marks = PointMass(float(rng.uniform(0.2, 3.0)))
    elif family == 3:
        marks = ZeroInflated(float(rng.uniform(0.05, 0.9)), Exponential(float(rng.uniform(0.3, 3.0))))
    else:
        values = rng.uniform(0.0, 3.0, size=int(rng.integers(2, 8)))
        w = rng.uniform(0.1, 1.0, size=values.size)
        w /= w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        marks = Empirical(tuple(values.tolist()), tuple(w.tolist()))
    model = CompoundPoissonModel(float(rng.uniform(0.3, 3.0)), marks)
    u = model.mean * float(np.exp(rng.uniform(-1.2, 1.2)))
    return model, u


def brute_force_gap(model: CompoundPoissonModel, u: float, points: int = 1_000_000) -> float:
    res = rt.rate_function(model, u)
    lam = res.lambda_star
    lmax = model.lambda_max
    upper = lam + 2.0
    if math.isfinite(lmax):
        upper = min(upper, lmax - 1e-9 * max(1.0, abs(lmax)))
    grid = np.linspace(lam - 2.0, upper, points)
    return abs(res.value - rt.brute_force_rate(model, u, grid))


def check_brute_force(cases: int = 50, seed: int = 2006) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = max(brute_force_gap(*random_case(rng)) for _ in range(cases))
    return [Check(f"solver vs grid supremum ({cases} cases)", "0", _g(worst), "1e-06", worst <= 1e-6)]


def _within(name, target, observed, se, k=4.0) -> Check:
    dev = abs(observed - target)
    return Check(name, _g(target), f"{_g(observed)}+-{_g(se)}", f"{k:g}sigma", dev <= k * se)


def check_laplace(n: int, seed: int, workers: int) -> list[Check]:
    out = []
    for label, model, lam, t in (
        ("Exp(1)", CompoundPoissonModel(1.0, Exponential(1.0)), 0.3, 2.0),
        ("PointMass(1)", CompoundPoissonModel(1.0, PointMass(1.0)), 0.5, 1.0),
    ):
        e = est.empirical_laplace(model, lam, t, n, seed, workers)
        out.append(_within(f"Laplace transform {label} lam={lam} t={t}", e.exact, e.mean, e.std_err))
    return out


def poisson_count_checks(counts: np.ndarray, mean: float) -> list[Check]:
    n = counts.size
    m = float(counts.mean())
    ratio = float(counts.var(ddof=1)) / m
    kmax = int(max(counts.max(), mean + 10 * math.sqrt(mean) + 10))
    ks = np.arange(kmax + 1)
    expected = n * stats.poisson.pmf(ks, mean)
    expected[-1] += n * stats.poisson.sf(kmax, mean)
    observed = np.bincount(counts, minlength=kmax + 1).astype(float)
    # merge sparse tails so every bin expects at least 5
    lo = int(np.searchsorted(np.cumsum(expected), 5.0))
    hi = kmax - int(np.searchsorted(np.cumsum(expected[::-1]), 5.0))
    obs = np.concatenate(([observed[: lo + 1].sum()], observed[lo + 1 : hi], [observed[hi:].sum()]))
    exp = np.concatenate(([expected[: lo + 1].sum()], expected[lo + 1 : hi], [expected[hi:].sum()]))
    exp *= obs.sum() / exp.sum()
    pvalue = float(stats.chisquare(obs, exp).pvalue)
    return [
        _within("positive-jump count mean (Poisson)", mean, m, math.sqrt(mean / n)),
        Check("positive-jump count variance/mean", "1", _g(ratio), "[0.95, 1.05]", 0.95 <= ratio <= 1.05),
        Check("positive-jump count chi-square p-value", "> 0.001", _g(pvalue), "0.001", pvalue > 0.001),
    ]


def check_zero_atom(n: int, seed: int, workers: int) -> list[Check]:
    model = CompoundPoissonModel(1.0, Exponential(1.0))
    exact = est.zero_probability(model, 5.0)
    target = math.exp(-5.0)
    mc = est.mc_probability(model, est.EventWindow(0.0, 1e-9), 5.0, n, seed, workers)
    zi = CompoundPoissonModel(1.0, ZeroInflated(0.4, Exponential(1.0)))
    counts = simulate_paths(zi, 10.0, n, seed, workers, keep_jumps=False).positive_counts
    return [
        Check("P(S_5 = 0) exact", _g(target), _g(exact.p_hat), "0", exact.p_hat == target),
        _within("P(S_5 = 0) crude MC", target, mc.p_hat, mc.std_err),
        *poisson_count_checks(counts, 6.0),
    ]


def check_local_ldp(n: int, seed: int, workers: int) -> list[Check]:
    model = CompoundPoissonModel(1.0, Exponential(1.0))
    window = est.EventWindow(4.0, 0.1)
    edges = [rt.closed_form_rate_exp_continuous(1.0, u) for u in (3.9, 4.1)]
    lo, hi = min(edges) - 0.05, max(edges) + 0.05
    res = est.is_probability(model, window, 100.0, n, seed, workers)
    mc = est.mc_probability(model, window, 100.0, n, seed, workers)
    decay = res.log_decay if res.log_decay is not None else math.nan
    return [
        Check("IS decay rate u=4 d=0.1 t=100", f"[{lo:.4f}, {hi:.4f}]", _g(decay), "bracket", lo <= decay <= hi),
        Check("crude MC hits at u=4 t=100", "0", str(round(mc.p_hat * n)), "exact", mc.p_hat == 0.0),
    ]


def check_tilted_law(n: int, seed: int, workers: int) -> list[Check]:
    model = CompoundPoissonModel(1.0, Exponential(1.0))
    lam, t = 0.5, 50.0
    s = simulate_tilted_paths(model, lam, t, n, seed, workers, keep_jumps=False).s_t
    mean_target = cgf.cumulant_derivative(model, lam, 1)
    var_target = cgf.cumulant_derivative(model, lam, 2) / t
    var = float(s.var(ddof=1))
    checks = [
        _within("tilted mean of S_t (lam=0.5, t=50)", mean_target, float(s.mean()), math.sqrt(var / n)),
        Check(
            "tilted variance of S_t (lam=0.5, t=50)", _g(var_target), _g(var), "5%",
            abs(var / var_target - 1.0) <= 0.05,
        ),
    ]
    for lam_m in (0.2, 0.5):
        m, se = est.martingale_mean(model, lam_m, 5.0, n, seed, workers)
        checks.append(_within(f"E exp(log L) = 1 (lam={lam_m}, t=5)", 1.0, m, se))
    return checks


def check_chernoff(n: int, seed: int, workers: int) -> list[Check]:
    model = CompoundPoissonModel(1.0, Exponential(1.0))
    bound = est.chernoff_tail_bound(model, 10.0, 1.0)
    checks = [Check("Chernoff bound lam=0.5 j=10 t=1", _g(math.exp(-4)), _g(bound), "1e-12",
                    abs(bound - math.exp(-4)) <= 1e-12)]
    worst = -math.inf
    for j in range(1, 7):
        mc = est.mc_probability(model, est.TailEvent(float(j)), 1.0, n, seed, workers)
        worst = max(worst, mc.p_hat - est.chernoff_tail_bound(model, float(j), 1.0) - 4 * mc.std_err)
    checks.append(Check("MC tail <= Chernoff bound + 4sigma (j=1..6)", "<= 0", _g(worst), "4sigma", worst <= 0))
    return checks


def run_all(n: int = 200_000, seed: int = 0, workers: int = 1) -> list[Check]:
    """Every check at ``n`` paths (the Laplace/zero-atom/Chernoff checks use 5n)."""
    return [
        *check_closed_form_continuous(),
        *check_closed_form_discrete(),
        *check_brute_force(),
        *check_laplace(5 * n, seed, workers),
        *check_zero_atom(5 * n, seed, workers),
        *check_local_ldp(n, seed, workers),
        *check_tilted_law(n, seed, workers),
        *check_chernoff(5 * n, seed, workers),
    ]
