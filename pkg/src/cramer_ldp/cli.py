"""Command-line front end: ``rate``, ``simulate``, ``estimate`` and ``validate``.

Settings come from command-line flags, then a ``--config`` file of flat
``key=value`` lines, then built-in defaults, in that order of precedence.
Exit codes: 0 success, 1 failed validation check, 2 usage error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import estimate as est
from . import rate as rt
from . import validation
from .cumulant import CompoundPoissonModel
from .errors import NumericError, UsageError
from .marks import Exponential, parse_dist
from .simulate import simulate_paths, write_paths_csv

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_SEED = 0
METHODS = ("mc", "is", "zero", "chernoff", "laplace", "decay")


def fmt(x) -> str:
    """17 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


@dataclass
class RunConfig:
    command: str | None = None
    dist: str | None = None
    rate: float | None = None
    u_grid: str | None = None
    discrete: bool = False
    closed_form: bool = False
    t: float | None = None
    t_grid: str | None = None
    paths: int | None = None
    seed: int = DEFAULT_SEED
    out: str | None = None
    format: str | None = None
    method: str | None = None
    u: float | None = None
    delta: float | None = None
    lam: float | None = None
    j: float | None = None
    optimal: bool = False
    workers: int = 1

    def to_text(self) -> str:
        """Flat key=value form accepted by ``--config``."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None or f.name == "command":
                continue
            lines.append(f"{f.name}={value!r}" if isinstance(value, float) else f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        cfg = cls()
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in types:
                raise UsageError(f"unknown config key {key!r}")
            setattr(cfg, name, _coerce(name, types[name], raw))
        return cfg


def _coerce(name: str, type_: str, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    try:
        if type_.startswith("bool"):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if type_.startswith("int"):
            return int(raw)
        if type_.startswith("float"):
            return float(raw)
    except ValueError:
        raise UsageError(f"bad value {raw!r} for {name}") from None
    return raw.strip()


def read_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def parse_grid(spec: str, name: str = "u-grid") -> np.ndarray:
    """``start:stop:step`` inclusive of ``stop``."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"{name} must be start:stop:step, got {spec!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"{name} has a non-numeric field: {spec!r}") from None
    if start < 0:
        raise UsageError(f"{name} start must be >= 0, got {start!r}")
    if not step > 0 or stop < start:
        raise UsageError(f"{name} needs step > 0 and stop >= start, got {spec!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    grid = start + step * np.arange(count)
    if count > 1 and abs(grid[-1] - stop) <= 1e-9 * max(1.0, abs(stop)):
        grid[-1] = stop
    return grid


def _build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="flat key=value file; flags override it")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)

    model = argparse.ArgumentParser(add_help=False, argument_default=S)
    model.add_argument("--dist", help="exp:<mean> | gamma:<k>:<scale> | point:<c> | zeroinf:<p0>:<spec> | emp:<path>")
    model.add_argument("--rate", type=float, help="jump rate r > 0")

    parser = argparse.ArgumentParser(prog="cramer-ldp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", parents=[common, model], argument_default=S, help="rate-function table")
    p.add_argument("--u-grid", dest="u_grid", help="start:stop:step, stop included")
    p.add_argument("--discrete", action="store_true", help="i.i.d. sample mean instead of S_t")
    p.add_argument("--closed-form", dest="closed_form", action="store_true",
                   help="add the closed-form column for exponential marks")

    p = sub.add_parser("simulate", parents=[common, model], argument_default=S, help="dump simulated paths")
    p.add_argument("--t", type=float, help="horizon")
    p.add_argument("--paths", type=int)

    p = sub.add_parser("estimate", parents=[common, model], argument_default=S, help="probability estimates")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--t", type=float, help="horizon")
    p.add_argument("--t-grid", dest="t_grid", help="comma-separated horizons (method decay)")
    p.add_argument("--paths", type=int)
    p.add_argument("--u", type=float, help="window centre")
    p.add_argument("--delta", type=float, help="window half-width")
    p.add_argument("--j", type=float, help="tail level for chernoff, or tail event S_t > j for mc")
    p.add_argument("--lam", type=float, help="tilt for chernoff/laplace")
    p.add_argument("--optimal", action="store_true", help="chernoff: use the optimal tilt")

    p = sub.add_parser("validate", parents=[common], argument_default=S, help="run the self-check suite")
    p.add_argument("--paths", type=int, help="base path count for statistical checks")
    return parser


def resolve_config(argv) -> RunConfig:
    ns = vars(_build_parser().parse_args(argv))
    merged = {}
    if "config" in ns:
        merged.update(read_config_file(ns.pop("config")))
    merged.update(ns)
    cfg = RunConfig.from_mapping(merged)
    if cfg.workers < 1:
        raise UsageError("--workers must be >= 1")
    if cfg.paths is not None and cfg.paths < 1:
        raise UsageError("--paths must be >= 1")
    return cfg


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _model(cfg: RunConfig) -> CompoundPoissonModel:
    _require(cfg, "dist", "rate")
    return CompoundPoissonModel(cfg.rate, parse_dist(cfg.dist))


def _write_table(out, header, rows, form: str) -> None:
    if form == "json":
        records = [{k: _json_value(v) for k, v in zip(header, row)} for row in rows]
        out.write(json.dumps(records, indent=1) + "\n")
        return
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(fmt(v) for v in row) + "\n")


def _write_record(out, record: dict, form: str) -> None:
    if form == "json":
        out.write(json.dumps({k: _json_value(v) for k, v in record.items()}) + "\n")
    else:
        _write_table(out, list(record), [list(record.values())], "csv")


def cmd_rate(cfg: RunConfig, out) -> int:
    _require(cfg, "dist", "u_grid")
    dist = parse_dist(cfg.dist)
    grid = parse_grid(cfg.u_grid)
    if cfg.discrete:
        results = [rt.rate_function_discrete(dist, float(u)) for u in grid]
        oracle = None
        if isinstance(dist, Exponential):
            oracle = lambda u: rt.closed_form_rate_exp_discrete(u / dist.theta)  # noqa: E731
    else:
        _require(cfg, "rate")
        model = CompoundPoissonModel(cfg.rate, dist)
        results = [rt.rate_function(model, float(u)) for u in grid]
        oracle = None
        if isinstance(dist, Exponential):
            oracle = lambda u: rt.closed_form_rate_exp_continuous(cfg.rate, u / dist.theta)  # noqa: E731

    header = ["u", "I", "lambda_star", "branch"]
    rows = []
    for res in results:
        lam = res.lambda_star if res.branch is rt.Branch.INTERIOR else None
        rows.append([res.u, res.value, lam, str(res.branch)])
    if cfg.closed_form:
        if oracle is None:
            print("note: --closed-form applies only to exponential marks; column omitted", file=sys.stderr)
        else:
            header.append("I_closed_form")
            for row in rows:
                row.append(oracle(row[0]))
    _write_table(out, header, rows, cfg.format or "csv")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out) -> int:
    model = _model(cfg)
    _require(cfg, "t", "paths")
    batch = simulate_paths(model, cfg.t, cfg.paths, cfg.seed, cfg.workers)
    write_paths_csv(batch, out)
    summary = {
        "paths": len(batch),
        "t": cfg.t,
        "seed": cfg.seed,
        "mean_s_t": float(batch.s_t.mean()),
        "mean_jump_count": float(batch.counts.mean()),
        "mean_positive_jump_count": float(batch.positive_counts.mean()),
    }
    dest = sys.stderr if cfg.out is None else sys.stdout
    if cfg.format == "json":
        print(json.dumps(summary), file=dest)
    else:
        print(" ".join(f"{k}={fmt(v)}" for k, v in summary.items()), file=dest)
    return EXIT_OK


def cmd_estimate(cfg: RunConfig, out) -> int:
    _require(cfg, "method")
    model = _model(cfg)
    method = cfg.method
    if method == "zero":
        _require(cfg, "t")
        record = est.zero_probability(model, cfg.t).to_record()
    elif method == "mc":
        _require(cfg, "t", "paths")
        if cfg.j is not None:
            event = est.TailEvent(cfg.j)
        else:
            _require(cfg, "u", "delta")
            event = est.EventWindow(cfg.u, cfg.delta)
        record = est.mc_probability(model, event, cfg.t, cfg.paths, cfg.seed, cfg.workers).to_record()
    elif method == "is":
        _require(cfg, "u", "delta", "t", "paths")
        res = est.is_probability(model, est.EventWindow(cfg.u, cfg.delta), cfg.t, cfg.paths, cfg.seed, cfg.workers)
        record = res.to_record()
    elif method == "chernoff":
        _require(cfg, "j", "t")
        bound = est.chernoff_tail_bound(model, cfg.j, cfg.t, cfg.lam, cfg.optimal)
        record = {"method": "ChernoffBound", "j": cfg.j, "t": cfg.t, "lam": cfg.lam,
                  "optimal": cfg.optimal, "bound": bound}
    elif method == "laplace":
        _require(cfg, "lam", "t", "paths")
        e = est.empirical_laplace(model, cfg.lam, cfg.t, cfg.paths, cfg.seed, cfg.workers)
        record = {"method": "EmpiricalLaplace", "lam": cfg.lam, "t": cfg.t, "n": e.n_paths,
                  "seed": cfg.seed, "mean": e.mean, "std_err": e.std_err, "exact": e.exact}
    elif method == "decay":
        _require(cfg, "u", "delta", "t_grid", "paths")
        try:
            t_grid = [float(x) for x in cfg.t_grid.split(",")]
        except ValueError:
            raise UsageError(f"--t-grid must be comma-separated numbers, got {cfg.t_grid!r}") from None
        curve = est.decay_rate_curve(model, est.EventWindow(cfg.u, cfg.delta), t_grid, cfg.paths,
                                     cfg.seed, cfg.workers)
        _write_table(out, ["t", "log_decay", "log_decay_std_err"], [list(row) for row in curve], cfg.format or "csv")
        return EXIT_OK
    else:
        raise UsageError(f"unknown method {method!r}")
    _write_record(out, record, cfg.format or "json")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, out) -> int:
    checks = validation.run_all(n=cfg.paths or 200_000, seed=cfg.seed, workers=cfg.workers)
    for check in checks:
        out.write(check.line() + "\n")
    failed = sum(not c.passed for c in checks)
    out.write(f"{len(checks) - failed}/{len(checks)} checks passed\n")
    return EXIT_CHECK if failed else EXIT_OK


COMMANDS = {"rate": cmd_rate, "simulate": cmd_simulate, "estimate": cmd_estimate, "validate": cmd_validate}


@contextlib.contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
        return
    buf = io.StringIO()
    yield buf
    # written only after the command succeeds; newline="" keeps bytes identical across platforms
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        with _output(cfg.out) as out:
            return COMMANDS[cfg.command](cfg, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
