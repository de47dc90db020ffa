"""Repeated runs, per-run records and aggregate reports.

Per-run seeds are ``master_seed XOR run_id``.  Within a run, worker ``w``
uses ``run_seed XOR (w << 32)``, so worker 0 of every parallel run walks
exactly like the sequential run with the same id.

Records are flat dicts with the columns in :data:`COLUMNS`; they are
written as CSV (header, one line per run, ``#``-prefixed aggregate
footer) or as JSON (``{"rows": [...], "aggregates": [...]}``).
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from adaptsearch.engine import EngineParams, warm_up
from adaptsearch.problems import ProblemKind, build_problem
from adaptsearch.rng import derive_seed
from adaptsearch.runtime import ParallelParams, run_parallel

COLUMNS = [
    ("run_id", int),
    ("problem", str),
    ("n", int),
    ("variant", str),
    ("workers", int),
    ("k", int),
    ("seed", int),
    ("solved", int),
    ("wall_ms", float),
    ("iterations", int),
    ("local_minima", int),
    ("resets", int),
    ("restarts", int),
    ("same_var_avg", float),
    ("winner_rank", int),
    ("adoptions", int),
    ("propagations", int),
]
COLUMN_NAMES = [name for name, _ in COLUMNS]
TIME_COLUMNS = ("wall_ms",)
VARIANTS = ("seq", "tdo", "poc")
ENGINE_KEYS = ("tabu_tenure", "reset_limit", "reset_fraction", "max_iterations",
               "max_restarts", "escape", "plateau_moves")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    problem: str
    n: int
    variant: str = "seq"
    workers: int = 1
    arity: int = 2
    k: Sequence[int] = (100,)
    runs: int = 100
    seed: int = 0
    engine_overrides: Dict[str, object] = field(default_factory=dict)
    output_format: str = "csv"
    output: Optional[str] = None
    scheduler: str = "threads"

    def __post_init__(self):
        try:
            self.kind = ProblemKind.parse(self.problem)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.problem = self.kind.label
        if isinstance(self.k, int):
            self.k = (self.k,)
        self.k = tuple(int(x) for x in self.k)
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.variant == "seq" and self.workers != 1:
            raise ConfigError("the seq variant runs a single worker")
        if not self.k or min(self.k) < 1:
            raise ConfigError("k values must be positive")
        if self.output_format not in ("csv", "json"):
            raise ConfigError("output format must be csv or json")
        unknown = set(self.engine_overrides) - set(ENGINE_KEYS)
        if unknown:
            raise ConfigError(f"unknown engine parameter(s): {sorted(unknown)}")
        try:
            spec = build_problem(self.kind, self.n)
            EngineParams.defaults(spec, **self.engine_overrides)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def engine_params_for(spec, overrides, seed, k):
    return replace(EngineParams.defaults(spec, **overrides), seed=int(seed), comm_interval_k=int(k))


def run_one(spec, config: ExperimentConfig, run_id: int, k: int) -> dict:
    seed = derive_seed(config.seed, run_id)
    params = engine_params_for(spec, config.engine_overrides, seed, k)
    variant = "tdo" if config.variant == "seq" else config.variant
    pparams = ParallelParams(variant=variant, num_workers=config.workers, arity=config.arity,
                             comm_interval_k=k, scheduler=config.scheduler)
    out = run_parallel(spec, params, pparams)
    rank = out.winner_rank if out.solved else 0
    st = out.worker_stats[rank]
    return {
        "run_id": run_id,
        "problem": spec.kind.label,
        "n": spec.n,
        "variant": config.variant,
        "workers": config.workers,
        "k": k,
        "seed": seed,
        "solved": int(out.solved),
        "wall_ms": out.wall_time * 1000.0,
        "iterations": st.iterations,
        "local_minima": st.local_minima,
        "resets": st.resets,
        "restarts": st.restarts,
        "same_var_avg": st.same_var_per_iteration,
        "winner_rank": out.winner_rank if out.solved else -1,
        "adoptions": out.adoptions,
        "propagations": out.propagations,
    }


def _median(xs):
    return statistics.median(xs) if xs else float("nan")


def _mean(xs):
    return statistics.fmean(xs) if xs else float("nan")


def summarize(rows: List[dict]) -> dict:
    """Aggregate one configuration; time and counter means use solved runs only."""
    if not rows:
        raise ValueError("no rows to summarize")
    first = rows[0]
    ok = [r for r in rows if r["solved"]]
    wall = [r["wall_ms"] for r in ok]
    return {
        "problem": first["problem"],
        "n": first["n"],
        "variant": first["variant"],
        "workers": first["workers"],
        "k": first["k"],
        "runs": len(rows),
        "solved": len(ok),
        "solve_rate": len(ok) / len(rows),
        "wall_ms_mean": _mean(wall),
        "wall_ms_median": _median(wall),
        "wall_ms_min": min(wall) if wall else float("nan"),
        "wall_ms_max": max(wall) if wall else float("nan"),
        "iterations_mean": _mean([r["iterations"] for r in ok]),
        "local_minima_mean": _mean([r["local_minima"] for r in ok]),
        "resets_mean": _mean([r["resets"] for r in ok]),
        "restarts_mean": _mean([r["restarts"] for r in ok]),
        "same_var_mean": _mean([r["same_var_avg"] for r in ok]),
        "speedup": float("nan"),
        "solved_only": True,
    }


def group_key(row):
    return (row["problem"], row["n"], row["variant"], row["workers"], row["k"])


@dataclass
class AggregateReport:
    rows: List[dict]
    aggregates: List[dict]

    @classmethod
    def from_rows(cls, rows, baseline=0):
        groups = {}
        for r in rows:
            groups.setdefault(group_key(r), []).append(r)
        aggs = [summarize(g) for g in groups.values()]
        report = cls(list(rows), aggs)
        if aggs:
            report.set_baseline(baseline)
        return report

    def set_baseline(self, index):
        base = self.aggregates[index]["wall_ms_median"]
        for a in self.aggregates:
            a["speedup"] = speedup_ratio(base, a["wall_ms_median"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMN_NAMES)
        for r in self.rows:
            writer.writerow([format_value(r[name]) for name in COLUMN_NAMES])
        for a in self.aggregates:
            buf.write("# aggregate " + json.dumps(a, sort_keys=True) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "aggregates": self.aggregates}, indent=2)

    def write(self, path, fmt="csv"):
        text = self.to_json() if fmt == "json" else self.to_csv()
        path = Path(path)
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}") from None


def speedup_ratio(baseline_ms, other_ms):
    if other_ms != other_ms or baseline_ms != baseline_ms or other_ms == 0:
        return float("nan")
    return baseline_ms / other_ms


def format_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_row(fields) -> dict:
    if len(fields) != len(COLUMNS):
        raise ValueError(f"expected {len(COLUMNS)} fields, got {len(fields)}")
    return {name: typ(value) for (name, typ), value in zip(COLUMNS, fields)}


def read_results(path) -> AggregateReport:
    """Load per-run rows from a CSV or JSON results file; aggregates are recomputed."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
            rows = [{name: typ(r[name]) for name, typ in COLUMNS} for r in data["rows"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"malformed results file {path}: {exc}") from None
        return AggregateReport.from_rows(rows)
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError(f"empty results file {path}") from None
    if header != COLUMN_NAMES:
        raise ConfigError(f"unexpected header in {path}")
    try:
        rows = [parse_row(f) for f in reader]
    except ValueError as exc:
        raise ConfigError(f"malformed row in {path}: {exc}") from None
    return AggregateReport.from_rows(rows)


def run_batch(config: ExperimentConfig, progress=None) -> AggregateReport:
    """Run every k value of ``config`` for ``config.runs`` runs each.

    Configurations run one after another.  A run that exhausts its budget
    is recorded with ``solved=0``; it never aborts the batch.
    """
    spec = build_problem(config.kind, config.n)
    warm_up(spec)
    rows = []
    for k in config.k:
        for run_id in range(config.runs):
            row = run_one(spec, config, run_id, k)
            rows.append(row)
            if progress is not None:
                progress(row)
    report = AggregateReport.from_rows(rows)
    if config.output:
        report.write(config.output, config.output_format)
    return report


def compare(baseline: AggregateReport, parallel: AggregateReport) -> float:
    """Ratio of median wall times (solved runs) of two result sets."""
    base = _median([r["wall_ms"] for r in baseline.rows if r["solved"]])
    other = _median([r["wall_ms"] for r in parallel.rows if r["solved"]])
    return speedup_ratio(base, other)


TABLE_COLUMNS = ("Iterations", "Local Minima", "Resets", "Same var/Iteration")


def stats_table(instances, runs=100, seed=0, overrides=None, progress=None):
    """Sequential characterization: mean counters over solved runs per instance."""
    table = []
    for problem, n in instances:
        cfg = ExperimentConfig(problem=problem, n=n, variant="seq", runs=runs, seed=seed,
                               engine_overrides=dict(overrides or {}))
        report = run_batch(cfg, progress=progress)
        agg = report.aggregates[0]
        table.append({
            "problem": f"{cfg.kind.label} {n}",
            "runs": agg["runs"],
            "solved": agg["solved"],
            "Iterations": agg["iterations_mean"],
            "Local Minima": agg["local_minima_mean"],
            "Resets": agg["resets_mean"],
            "Same var/Iteration": agg["same_var_mean"],
            "rows": report.rows,
        })
    return table


def format_table(table) -> str:
    head = f"{'Problem':<22}" + "".join(f"{c:>20}" for c in TABLE_COLUMNS) + f"{'solved':>10}"
    lines = [head, "-" * len(head)]
    for t in table:
        cells = "".join(f"{t[c]:>20.2f}" for c in TABLE_COLUMNS)
        lines.append(f"{t['problem']:<22}{cells}{t['solved']:>6}/{t['runs']:<3}")
    return "\n".join(lines)
