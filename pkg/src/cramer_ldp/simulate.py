"""Simulation of the marked point process (tau_i, xi_i) on (0, t].

Arrival gaps are i.i.d. exponential with rate ``r`` and marks are i.i.d. from G,
independent of the arrival history. Paths are generated in fixed blocks of
``BLOCK_SIZE``; block ``b`` draws from ``SeedSequence(seed, spawn_key=(b,))``.
A path is therefore a function of (model, t, seed, path index) alone, however
many paths are requested and however many workers share the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import cumulant as cgf
from .cumulant import CompoundPoissonModel
from .errors import UsageError
from .marks import exponential_moment, tilt

BLOCK_SIZE = 1024
# cap on gap draws held in memory at once inside a block
_MAX_CHUNK_DRAWS = 2_000_000


def _frozen(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


class PathSample:
    """One trajectory on (0, t]: increasing jump times and their marks."""

    __slots__ = ("t", "times", "marks", "total")

    def __init__(self, t: float, times, marks):
        self.t = float(t)
        self.times = _frozen(times)
        self.marks = _frozen(marks)
        if self.times.shape != self.marks.shape or self.times.ndim != 1:
            raise UsageError("jump times and marks must be 1-d arrays of equal length")
        # sequential left-to-right sum, identical to the batch reduction
        self.total = float(np.cumsum(self.marks)[-1]) if self.marks.size else 0.0

    @property
    def s_t(self) -> float:
        return self.total / self.t

    @property
    def jump_count(self) -> int:
        return int(self.times.size)

    @property
    def jump_count_positive(self) -> int:
        return int(np.count_nonzero(self.marks > 0))

    def __eq__(self, other):
        if not isinstance(other, PathSample):
            return NotImplemented
        return (
            self.t == other.t
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.marks, other.marks)
            and self.total == other.total
        )

    def __repr__(self) -> str:
        return f"PathSample(t={self.t!r}, jumps={self.jump_count}, total={self.total!r})"


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Paths ``0 .. n-1`` of one seeded run, in path-index order.

    ``times``/``marks`` hold every jump flattened path by path (``None`` when the
    run was made with ``keep_jumps=False``); path ``i`` owns the slice
    ``offsets[i]:offsets[i+1]``.
    """

    t: float
    counts: np.ndarray
    positive_counts: np.ndarray
    totals: np.ndarray
    times: np.ndarray | None = None
    marks: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.counts.size)

    @property
    def s_t(self) -> np.ndarray:
        return self.totals / self.t

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.counts)))

    def path(self, i: int) -> PathSample:
        if self.times is None:
            raise UsageError("batch was simulated without keep_jumps; individual jumps are unavailable")
        if not 0 <= i < len(self):
            raise IndexError(i)
        off = self.offsets
        sl = slice(off[i], off[i + 1])
        return PathSample(self.t, self.times[sl], self.marks[sl])

    def __iter__(self):
        return (self.path(i) for i in range(len(self)))


def _check_horizon(t: float) -> None:
    if not (t > 0 and math.isfinite(t)):
        raise UsageError(f"horizon must be positive and finite, got {t!r}")


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator number ``index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def simulate_path(model: CompoundPoissonModel, t: float, rng: np.random.Generator) -> PathSample:
    """Draw one path sequentially: exponential gaps until the first arrival past t."""
    _check_horizon(t)
    scale = 1.0 / model.r
    times, marks = [], []
    tau = 0.0
    while True:
        tau += rng.exponential(scale)
        if tau > t:
            break
        times.append(tau)
        marks.append(model.marks.sample(rng))
    return PathSample(t, times, marks)


def tilted_model(model: CompoundPoissonModel, lam: float) -> CompoundPoissonModel:
    """Law of the process under the change of measure exp(lam*t*S_t - t*g_c(lam)).

    Compound Poisson again, with rate r * M_0(lam) and marks tilted by lam.
    """
    if lam == 0:
        return model
    rate = model.r * exponential_moment(model.marks, lam, 0)
    return CompoundPoissonModel(rate, tilt(model.marks, lam))


def simulate_tilted_path(
    model: CompoundPoissonModel, lam: float, t: float, rng: np.random.Generator
) -> PathSample:
    return simulate_path(tilted_model(model, lam), t, rng)


def _row_jumps(rng, scale, t, rows, width):
    """Arrival times for ``rows`` paths: (per-row counts, flat times in row order)."""
    arrivals = np.cumsum(rng.exponential(scale, (rows, width)), axis=1)
    inside = arrivals <= t
    counts = inside.sum(axis=1)
    short = np.flatnonzero(arrivals[:, -1] <= t)
    if short.size == 0:
        return counts, arrivals[inside]
    # rare: some rows used every drawn gap without leaving (0, t]
    per_row = [arrivals[i, : counts[i]] for i in range(rows)]
    for i in short:
        tau = arrivals[i, -1]
        extra = []
        while True:
            more = tau + np.cumsum(rng.exponential(scale, width))
            keep = more[more <= t]
            extra.append(keep)
            if keep.size < width:
                break
            tau = more[-1]
        per_row[i] = np.concatenate([per_row[i], *extra])
        counts[i] = per_row[i].size
    return counts, np.concatenate(per_row)


def _simulate_block(model: CompoundPoissonModel, t: float, seed: int, block: int, keep_jumps: bool):
    rng = substream(seed, block)
    scale = 1.0 / model.r
    mean = model.r * t
    width = int(mean + 6.0 * math.sqrt(mean) + 16)
    rows_per_chunk = max(1, min(BLOCK_SIZE, _MAX_CHUNK_DRAWS // width))

    counts, positive, totals, times, marks = [], [], [], [], []
    for start in range(0, BLOCK_SIZE, rows_per_chunk):
        rows = min(rows_per_chunk, BLOCK_SIZE - start)
        c, tau = _row_jumps(rng, scale, t, rows, width)
        xi = np.asarray(model.marks.sample(rng, int(tau.size)), dtype=float)
        owner = np.repeat(np.arange(rows), c)
        counts.append(c)
        positive.append(np.bincount(owner[xi > 0], minlength=rows))
        totals.append(np.bincount(owner, weights=xi, minlength=rows))
        if keep_jumps:
            times.append(tau)
            marks.append(xi)
    out = [np.concatenate(counts), np.concatenate(positive), np.concatenate(totals)]
    if keep_jumps:
        out += [np.concatenate(times), np.concatenate(marks)]
    return out


def simulate_paths(
    model: CompoundPoissonModel,
    t: float,
    n: int,
    seed: int = 0,
    workers: int = 1,
    keep_jumps: bool = True,
) -> PathBatch:
    """Paths ``0 .. n-1`` under (model, seed); identical for any ``workers``."""
    _check_horizon(t)
    if n < 1:
        raise UsageError(f"need at least one path, got n={n!r}")
    if workers < 1:
        raise UsageError(f"workers must be >= 1, got {workers!r}")
    n_blocks = -(-n // BLOCK_SIZE)

    def run(b):
        return _simulate_block(model, t, seed, b, keep_jumps)

    if workers == 1 or n_blocks == 1:
        parts = [run(b) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))

    counts = np.concatenate([p[0] for p in parts])[:n]
    positive = np.concatenate([p[1] for p in parts])[:n]
    totals = np.concatenate([p[2] for p in parts])[:n]
    times = marks = None
    if keep_jumps:
        kept = int(counts.sum())
        times = np.concatenate([p[3] for p in parts])[:kept]
        marks = np.concatenate([p[4] for p in parts])[:kept]
    return PathBatch(float(t), counts, positive, totals, times, marks)


def simulate_tilted_paths(
    model: CompoundPoissonModel,
    lam: float,
    t: float,
    n: int,
    seed: int = 0,
    workers: int = 1,
    keep_jumps: bool = True,
) -> PathBatch:
    return simulate_paths(tilted_model(model, lam), t, n, seed, workers, keep_jumps)


def log_likelihood_ratio(model: CompoundPoissonModel, lam: float, path):
    """log of the density process lam*t*S_t - t*g_c(lam) on a path or batch.

    Accepts a :class:`PathSample` (returns a float) or a :class:`PathBatch`
    (returns one value per path).
    """
    g = cgf.cumulant(model, lam)
    if isinstance(path, PathBatch):
        return lam * path.totals - path.t * g
    return lam * path.total - path.t * g


def write_paths_csv(batch: PathBatch, fh, fmt: str = "{:.17g}") -> None:
    """Dump ``path_id,tau,xi`` with one row per jump and a header line."""
    if batch.times is None:
        raise UsageError("batch was simulated without keep_jumps")
    fh.write("path_id,tau,xi\n")
    owner = np.repeat(np.arange(len(batch)), batch.counts)
    for pid, tau, xi in zip(owner.tolist(), batch.times.tolist(), batch.marks.tolist()):
        fh.write(f"{pid},{fmt.format(tau)},{fmt.format(xi)}\n")
