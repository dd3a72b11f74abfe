"""Experiment configs, the RRI grid runner, table output and the command line."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional

from .estimators import EstimatorId, EstimatorKind, LossId, Target, estimate
from .mixing import MixingSpec
from .model import TAU_COUPLINGS, ModelParams, ValidationError, stats_from_raw
from .risk import (
    default_threads,
    paired_rri_many,
    replicate_losses,
    rri,
    rri_std_error_independent,
    summarize,
)
from .specialfn import ConvergenceError, DomainError

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "CellKey",
    "CellResult",
    "RriTable",
    "parse_config",
    "load_config",
    "cell_seed",
    "run_grid",
    "run_risk_grid",
    "write_table",
    "read_table",
    "format_rri",
    "cli_main",
    "main",
]

MIN_REPLICATES = 100


class ConfigError(ValidationError):
    """A config document violates the schema; ``path`` locates the offending value."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ExperimentConfig:
    mixing: tuple
    size_pairs: tuple
    etas: tuple
    mu_pairs: tuple
    losses: tuple
    estimators: tuple
    baseline: EstimatorId
    replicates: int
    seed: int
    target: Target = Target.SIGMA1
    sigma2: float = 1.0
    paired: bool = True
    tau_coupling: str = "shared"
    name: str = ""
    description: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "target": self.target.value,
            "mixing": [str(m) for m in self.mixing],
            "size_pairs": [list(p) for p in self.size_pairs],
            "etas": list(self.etas),
            "mu_pairs": [list(p) for p in self.mu_pairs],
            "losses": [l.value for l in self.losses],
            "estimators": [e.kind.value for e in self.estimators],
            "baseline": self.baseline.kind.value,
            "replicates": self.replicates,
            "seed": self.seed,
            "sigma2": self.sigma2,
            "paired": self.paired,
            "tau_coupling": self.tau_coupling,
        }

    def sha256(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_REQUIRED = ("mixing", "size_pairs", "etas", "mu_pairs", "losses", "estimators", "baseline", "replicates", "seed")
_OPTIONAL = ("target", "sigma2", "paired", "tau_coupling", "name", "description")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _nonempty_list(doc, key):
    value = doc[key]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"$.{key}", "must be a non-empty list")
    return value


def _pair(value, path, check):
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(path, "must be a two-element list")
    for i, v in enumerate(value):
        check(v, f"{path}[{i}]")
    return tuple(value)


def _estimator_names() -> str:
    return ", ".join(k.value for k in EstimatorKind)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; unknown keys are rejected."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("$", "config must be a JSON object")
    unknown = sorted(set(doc) - set(_REQUIRED) - set(_OPTIONAL))
    if unknown:
        raise ConfigError(f"$.{unknown[0]}", f"unknown key; allowed keys: {', '.join(_REQUIRED + _OPTIONAL)}")
    for key in _REQUIRED:
        if key not in doc:
            raise ConfigError(f"$.{key}", "required key missing")

    try:
        target = Target.parse(doc.get("target", "sigma1"))
    except DomainError as exc:
        raise ConfigError("$.target", str(exc)) from None

    mixing = []
    for i, item in enumerate(_nonempty_list(doc, "mixing")):
        if not isinstance(item, str):
            raise ConfigError(f"$.mixing[{i}]", "must be a mixing spec string such as 'gamma:b=3'")
        try:
            mixing.append(MixingSpec.parse(item))
        except DomainError as exc:
            raise ConfigError(f"$.mixing[{i}]", str(exc)) from None

    def size_check(v, path):
        if not _is_int(v) or v < 3:
            raise ConfigError(path, "sample size must be an integer >= 3")

    def real_check(v, path):
        if not _is_number(v):
            raise ConfigError(path, "must be a finite number")

    size_pairs = [_pair(v, f"$.size_pairs[{i}]", size_check) for i, v in enumerate(_nonempty_list(doc, "size_pairs"))]
    mu_pairs = [tuple(float(x) for x in _pair(v, f"$.mu_pairs[{i}]", real_check))
                for i, v in enumerate(_nonempty_list(doc, "mu_pairs"))]

    etas = []
    for i, v in enumerate(_nonempty_list(doc, "etas")):
        if not _is_number(v) or not (0 < v <= 1):
            raise ConfigError(f"$.etas[{i}]", "eta out of (0,1]")
        etas.append(float(v))

    losses = []
    for i, v in enumerate(_nonempty_list(doc, "losses")):
        try:
            losses.append(LossId.parse(v))
        except DomainError as exc:
            raise ConfigError(f"$.losses[{i}]", str(exc)) from None

    def estimator(v, path):
        if not isinstance(v, str):
            raise ConfigError(path, f"must be an estimator name; valid names: {_estimator_names()}")
        try:
            kind = EstimatorKind.parse(v)
        except DomainError:
            raise ConfigError(path, f"unknown estimator {v!r}; valid names: {_estimator_names()}") from None
        try:
            return EstimatorId(kind, target)
        except DomainError as exc:
            raise ConfigError(path, str(exc)) from None

    estimators = [estimator(v, f"$.estimators[{i}]") for i, v in enumerate(_nonempty_list(doc, "estimators"))]
    if len({e.kind for e in estimators}) != len(estimators):
        raise ConfigError("$.estimators", "duplicate estimator names")
    baseline = estimator(doc["baseline"], "$.baseline")
    if baseline in estimators:
        raise ConfigError("$.baseline", "baseline must not also be listed in estimators")

    replicates = doc["replicates"]
    if not _is_int(replicates) or replicates < MIN_REPLICATES:
        raise ConfigError("$.replicates", f"must be an integer >= {MIN_REPLICATES}")
    seed = doc["seed"]
    if not _is_int(seed) or not (0 <= seed < 2**64):
        raise ConfigError("$.seed", "must be an integer in [0, 2^64)")
    sigma2 = doc.get("sigma2", 1.0)
    if not _is_number(sigma2) or sigma2 <= 0:
        raise ConfigError("$.sigma2", "must be a positive number")
    paired = doc.get("paired", True)
    if not isinstance(paired, bool):
        raise ConfigError("$.paired", "must be true or false")
    coupling = doc.get("tau_coupling", "shared")
    if coupling not in TAU_COUPLINGS:
        raise ConfigError("$.tau_coupling", f"must be one of {', '.join(TAU_COUPLINGS)}")
    for key in ("name", "description"):
        if not isinstance(doc.get(key, ""), str):
            raise ConfigError(f"$.{key}", "must be a string")

    return ExperimentConfig(
        mixing=tuple(mixing),
        size_pairs=tuple(size_pairs),
        etas=tuple(etas),
        mu_pairs=tuple(mu_pairs),
        losses=tuple(losses),
        estimators=tuple(estimators),
        baseline=baseline,
        replicates=replicates,
        seed=seed,
        target=target,
        sigma2=float(sigma2),
        paired=paired,
        tau_coupling=coupling,
        name=doc.get("name", ""),
        description=doc.get("description", ""),
    )


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


class CellKey(NamedTuple):
    loss: str
    mu1: float
    mu2: float
    p1: int
    p2: int
    eta: float
    mixing: str


class CellResult(NamedTuple):
    rri_percent: float
    rri_std_error: float
    baseline_risk: float
    improved_risk: float


@dataclass
class RriTable:
    config: ExperimentConfig
    cells: dict = field(default_factory=dict)

    @property
    def estimator_names(self) -> list:
        return [e.kind.value for e in self.config.estimators]


def grid_points(config: ExperimentConfig) -> list:
    """Cells in output order: loss, mu pair, (p1, p2), eta, then mixing."""
    return [
        CellKey(loss.value, mu[0], mu[1], p[0], p[1], eta, str(mix))
        for loss in config.losses
        for mu in config.mu_pairs
        for p in config.size_pairs
        for eta in config.etas
        for mix in config.mixing
    ]


def cell_seed(master_seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{int(master_seed)}:{int(index)}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


def _params_for(config: ExperimentConfig, key: CellKey) -> ModelParams:
    # grid convention: sigma2 fixed, sigma1 = eta * sigma2
    return ModelParams(key.mu1, key.mu2, key.eta * config.sigma2, config.sigma2, key.p1, key.p2)


class CellError(RuntimeError):
    def __init__(self, key: CellKey, exc: Exception):
        super().__init__(f"cell {dict(key._asdict())} failed: {exc}")
        self.key = key


def _run_cell(config, key, seed, threads):
    params = _params_for(config, key)
    mixing = MixingSpec.parse(key.mixing)
    kw = dict(threads=threads, tau_coupling=config.tau_coupling)
    if config.paired:
        results = paired_rri_many(config.baseline, config.estimators, key.loss, params, mixing,
                                  config.replicates, seed, **kw)
        return {
            est.kind.value: CellResult(r.rri_percent, r.rri_std_error, r.baseline.mean_loss, r.improved.mean_loss)
            for est, r in zip(config.estimators, results)
        }
    base = summarize(replicate_losses([config.baseline], key.loss, params, mixing,
                                       config.replicates, seed, **kw)[0], seed)
    out = {}
    for i, est in enumerate(config.estimators, start=1):
        sub = cell_seed(seed, i)
        imp = summarize(replicate_losses([est], key.loss, params, mixing, config.replicates, sub, **kw)[0], sub)
        out[est.kind.value] = CellResult(rri(base, imp), rri_std_error_independent(base, imp),
                                         base.mean_loss, imp.mean_loss)
    return out


def run_grid(config: ExperimentConfig, threads: Optional[int] = None,
             progress: Optional[Callable[[int, int, CellKey], None]] = None,
             only=None) -> RriTable:
    """RRI of every configured estimator against the baseline at each grid point.

    ``only`` restricts the run to a subset of cells; each keeps the seed it
    has in the full grid, so its numbers match the full table exactly.
    """
    table = RriTable(config)
    points = grid_points(config)
    wanted = None if only is None else set(only)
    if wanted is not None and not wanted <= set(points):
        raise ValidationError("requested cells are not part of the config grid")
    for index, key in enumerate(points):
        if wanted is not None and key not in wanted:
            continue
        if progress is not None:
            progress(index + 1, len(points), key)
        try:
            table.cells[key] = _run_cell(config, key, cell_seed(config.seed, index), threads)
        except (DomainError, ValidationError, RuntimeError) as exc:
            raise CellError(key, exc) from exc
    return table


def run_risk_grid(config: ExperimentConfig, threads: Optional[int] = None,
                  progress: Optional[Callable[[int, int, CellKey], None]] = None) -> list:
    """Plain Monte Carlo risk of the baseline and every estimator at each grid point."""
    rows = []
    estimators = [config.baseline, *config.estimators]
    points = grid_points(config)
    for index, key in enumerate(points):
        if progress is not None:
            progress(index + 1, len(points), key)
        seed = cell_seed(config.seed, index)
        try:
            losses = replicate_losses(estimators, key.loss, _params_for(config, key), MixingSpec.parse(key.mixing),
                                      config.replicates, seed, threads=threads, tau_coupling=config.tau_coupling)
        except (DomainError, ValidationError, RuntimeError) as exc:
            raise CellError(key, exc) from exc
        rows.append((key, {e.kind.value: summarize(losses[i], seed) for i, e in enumerate(estimators)}))
    return rows


def format_rri(value: float) -> str:
    """Three decimals; improvements below 0.001 print as ``0.000``."""
    if 0 <= value < 0.001 or (value < 0 and round(value, 3) == 0):
        return "0.000"
    return f"{value:.3f}"


_AXES = ["loss", "mu1", "mu2", "p1", "p2", "eta", "mixing"]


def _header_comments(config: ExperimentConfig) -> list:
    return [
        f"# config: {config.name or 'unnamed'}",
        f"# config_sha256: {config.sha256()}",
        f"# seed: {config.seed}",
        f"# convention: sigma2={config.sigma2:g}, sigma1=eta*sigma2",
        f"# target: {config.target.value}; baseline: {config.baseline.kind.value}; replicates: {config.replicates}",
        f"# tau_coupling: {config.tau_coupling}; paired: {str(config.paired).lower()}",
    ]


def _axis_values(key: CellKey) -> list:
    return [key.loss, f"{key.mu1:g}", f"{key.mu2:g}", str(key.p1), str(key.p2), f"{key.eta:g}", key.mixing]


def _table_csv(table: RriTable) -> str:
    buf = io.StringIO()
    for line in _header_comments(table.config):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = table.estimator_names
    writer.writerow(_AXES + [f"{n}_{col}" for n in names for col in ("rri", "se")])
    for key in grid_points(table.config):
        cell = table.cells[key]
        row = _axis_values(key)
        for n in names:
            row += [format_rri(cell[n].rri_percent), f"{cell[n].rri_std_error:.3f}"]
        writer.writerow(row)
    return buf.getvalue()


def _table_json(table: RriTable) -> str:
    doc = {
        "config": table.config.to_dict(),
        "config_sha256": table.config.sha256(),
        "convention": f"sigma2={table.config.sigma2:g}, sigma1=eta*sigma2",
        "cells": [
            {
                **key._asdict(),
                "results": {name: res._asdict() for name, res in table.cells[key].items()},
            }
            for key in grid_points(table.config)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def write_table(table: RriTable, path, format: str = "csv") -> None:
    """Write ``table`` as CSV (rounded, with ``#`` header comments) or JSON (full precision)."""
    missing = [k for k in grid_points(table.config) if k not in table.cells]
    if missing:
        raise ValidationError(f"table has no result for cell {dict(missing[0]._asdict())}")
    if format == "csv":
        text = _table_csv(table)
    elif format == "json":
        text = _table_json(table)
    else:
        raise ValidationError(f"format must be 'csv' or 'json', got {format!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_table(path) -> RriTable:
    """Load a table written with ``format="json"``."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    config = parse_config(json.dumps(doc["config"]))
    table = RriTable(config)
    for cell in doc["cells"]:
        results = cell.pop("results")
        key = CellKey(**cell)
        table.cells[key] = {name: CellResult(**res) for name, res in results.items()}
    return table


def _risk_csv(config: ExperimentConfig, rows: list) -> str:
    buf = io.StringIO()
    for line in _header_comments(config):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = [config.baseline.kind.value] + [e.kind.value for e in config.estimators]
    writer.writerow(_AXES + [f"{n}_{col}" for n in names for col in ("risk", "se")])
    for key, risks in rows:
        row = _axis_values(key)
        for n in names:
            row += [f"{risks[n].mean_loss:.6f}", f"{risks[n].std_error:.6f}"]
        writer.writerow(row)
    return buf.getvalue()


# command line

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _read_sample(text: str, name: str) -> list:
    path = Path(text)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    values = []
    for token in text.replace("\n", ",").replace(";", ",").split(","):
        token = token.strip()
        if not token or token.startswith("#"):
            continue
        try:
            values.append(float(token))
        except ValueError:
            raise ValidationError(f"--{name}: not a number: {token!r}") from None
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ordscale", description="Ordered scale estimation and Monte Carlo risk tables.")
    sub = parser.add_subparsers(dest="command", metavar="{estimate,risk,table,verify}", parser_class=_Parser)

    est = sub.add_parser("estimate", help="point estimates of sigma1 and sigma2 from raw samples")
    est.add_argument("--x", required=True, help="first sample: comma-separated values or a file")
    est.add_argument("--y", required=True, help="second sample: comma-separated values or a file")
    est.add_argument("--mixing", default="degenerate")
    est.add_argument("--loss", default="stein")
    est.add_argument("--estimator", default="baee")

    for name, help_text in (("risk", "Monte Carlo risk of each configured estimator"),
                            ("table", "RRI table for a config")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=(name == "table"))
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: $ORDSCALE_THREADS or 1)")
        p.add_argument("--quiet", action="store_true", help="no progress on stderr")
        if name == "table":
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    ver = sub.add_parser("verify", help="run the built-in oracle, limit and dominance checks")
    ver.add_argument("--replicates", type=int, default=20000)
    ver.add_argument("--seed", type=int, default=2024)
    return parser


def _progress(quiet: bool):
    if quiet:
        return None

    def report(i, n, key):
        print(f"[{i}/{n}] loss={key.loss} mu=({key.mu1:g},{key.mu2:g}) p=({key.p1},{key.p2}) "
              f"eta={key.eta:g} mixing={key.mixing}", file=sys.stderr)
    return report


def _cmd_estimate(args) -> int:
    stats = stats_from_raw(_read_sample(args.x, "x"), _read_sample(args.y, "y"))
    mixing = MixingSpec.parse(args.mixing)
    loss_id = LossId.parse(args.loss)
    kind = EstimatorKind.parse(args.estimator)
    print(f"s1={stats.s1:.10g} x_min={stats.x_min:.10g} s2={stats.s2:.10g} y_min={stats.y_min:.10g} "
          f"p1={stats.p1} p2={stats.p2}")
    for target in Target:
        if not EstimatorId.valid_for(kind, target):
            print(f"{target.value}_hat=n/a")
            continue
        value = estimate(EstimatorId(kind, target), loss_id, stats, mixing)
        print(f"{target.value}_hat={value:.10g}")
    return 0


def _threads(args) -> int:
    threads = default_threads() if args.threads is None else args.threads
    if threads < 1:
        raise ValidationError("--threads must be >= 1")
    return threads


def _cmd_risk(args) -> int:
    config = load_config(args.config)
    rows = run_risk_grid(config, threads=_threads(args), progress=_progress(args.quiet))
    text = _risk_csv(config, rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_table(args) -> int:
    config = load_config(args.config)
    table = run_grid(config, threads=_threads(args), progress=_progress(args.quiet))
    write_table(table, args.out, args.format)
    return 0


def _cmd_verify(args) -> int:
    from .verify import run_all

    results = run_all(replicates=args.replicates, seed=args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 2


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser.format_usage() + "ordscale: error: a subcommand is required")
        handler = {"estimate": _cmd_estimate, "risk": _cmd_risk, "table": _cmd_table, "verify": _cmd_verify}
        return handler[args.command](args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ConvergenceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())
