"""Command-line entry point: ``solve``, ``bench``, ``stats-table`` and ``speedup``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from adaptsearch.bench import (ENGINE_KEYS, AggregateReport, ConfigError, ExperimentConfig,
                               compare, format_table, read_results, run_batch, stats_table)
from adaptsearch.engine import EngineParams
from adaptsearch.problems import ProblemKind, build_problem
from adaptsearch.runtime import ParallelParams, run_parallel
from adaptsearch.validators import check_solution


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _k_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).split(",") if x.strip())


# config-file keys and their parsers; command-line flags use the same names
CONFIG_KEYS = {
    "problem": str,
    "size": int,
    "variant": str,
    "workers": int,
    "arity": int,
    "k": _k_list,
    "runs": int,
    "seed": int,
    "format": str,
    "output": str,
    "scheduler": str,
    "tabu_tenure": int,
    "reset_limit": int,
    "reset_fraction": float,
    "max_iterations": int,
    "max_restarts": int,
    "escape": str,
    "plateau_moves": _bool,
}


def parse_config_file(path):
    """Read ``key=value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def _add_engine_flags(p):
    g = p.add_argument_group("engine parameters (defaults depend on the problem)")
    g.add_argument("--tabu-tenure", type=int)
    g.add_argument("--reset-limit", type=int)
    g.add_argument("--reset-fraction", type=float)
    g.add_argument("--max-iterations", type=int)
    g.add_argument("--max-restarts", type=int)
    g.add_argument("--escape", choices=["tabu", "reset"])
    g.add_argument("--plateau-moves", type=_bool, metavar="BOOL")


def _engine_overrides(settings):
    return {k: settings[k] for k in ENGINE_KEYS if settings.get(k) is not None}


def build_parser():
    parser = argparse.ArgumentParser(prog="adaptsearch",
                                     description="Adaptive Search on permutation problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance and print the solution")
    p.add_argument("--problem", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=["seq", "tdo", "poc"], default="seq")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--arity", type=int, default=2)
    p.add_argument("--k", type=int, default=100)
    _add_engine_flags(p)

    p = sub.add_parser("bench", help="repeated runs, per-run rows plus aggregates")
    p.add_argument("--config", help="key=value file; command-line flags win")
    p.add_argument("--problem")
    p.add_argument("--size", type=int)
    p.add_argument("--variant", choices=["seq", "tdo", "poc"])
    p.add_argument("--workers", type=int)
    p.add_argument("--arity", type=int)
    p.add_argument("--k", type=_k_list, help="one value or a comma list, e.g. 10,100,1000")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--output", "-o", help="results file (default: stdout)")
    p.add_argument("--scheduler", choices=["threads", "lockstep"])
    p.add_argument("--quiet", action="store_true")
    _add_engine_flags(p)

    p = sub.add_parser("stats-table", help="sequential counters per instance")
    p.add_argument("instances", nargs="+", metavar="PROBLEM:N",
                   help="e.g. magic-square:20 costas:14 all-interval:50")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", help="also write the per-run rows as CSV")

    p = sub.add_parser("speedup", help="ratio of median solve times of two result files")
    p.add_argument("--baseline", required=True)
    p.add_argument("--parallel", required=True, nargs="+")
    return parser


def _fail(msg):
    print(f"adaptsearch: error: {msg}", file=sys.stderr)
    return 2


def cmd_solve(args):
    spec = build_problem(args.problem, args.size)
    params = EngineParams.defaults(spec, seed=args.seed, comm_interval_k=args.k,
                                   **_engine_overrides(vars(args)))
    variant = "tdo" if args.variant == "seq" else args.variant
    workers = 1 if args.variant == "seq" else args.workers
    out = run_parallel(spec, params, ParallelParams(variant=variant, num_workers=workers,
                                                    arity=args.arity, comm_interval_k=args.k))
    if not out.solved:
        st = out.worker_stats[0]
        print(f"no solution within budget ({st.iterations} iterations, {st.restarts} restarts)")
        return 1
    values = out.solution.values
    assert check_solution(spec.kind, spec.n, values)
    st = out.winner_stats
    print(f"{spec.kind.label} n={spec.n}: solved by worker {out.winner_rank} "
          f"in {out.wall_time * 1000:.1f} ms")
    if spec.kind is ProblemKind.MAGIC_SQUARE:
        width = len(str(spec.n * spec.n))
        for r in range(spec.n):
            print(" ".join(f"{v:>{width}}" for v in values[r * spec.n:(r + 1) * spec.n]))
    else:
        print(" ".join(str(v) for v in values))
    print(f"iterations={st.iterations} local_minima={st.local_minima} resets={st.resets} "
          f"restarts={st.restarts} same_var={st.same_var_per_iteration:.2f}")
    return 0


def _bench_settings(args):
    settings = parse_config_file(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    for key in ("problem", "size"):
        if key not in settings:
            raise ConfigError(f"missing required setting {key!r}")
    return settings


def cmd_bench(args):
    s = _bench_settings(args)
    variant = s.get("variant", "seq")
    cfg = ExperimentConfig(
        problem=s["problem"], n=s["size"], variant=variant,
        workers=s.get("workers", 1), arity=s.get("arity", 2),
        k=s.get("k", (100,)), runs=s.get("runs", 100), seed=s.get("seed", 0),
        engine_overrides=_engine_overrides(s), output_format=s.get("format", "csv"),
        output=s.get("output"), scheduler=s.get("scheduler", "threads"),
    )
    if cfg.output:
        # fail before spending minutes on runs
        try:
            Path(cfg.output).open("a").close()
        except OSError as exc:
            raise ConfigError(f"cannot write {cfg.output}: {exc}") from None

    def progress(row):
        if not args.quiet:
            print(f"run {row['run_id']} k={row['k']}: solved={row['solved']} "
                  f"{row['wall_ms']:.1f} ms", file=sys.stderr)

    report = run_batch(cfg, progress=progress)
    if not cfg.output:
        sys.stdout.write(report.to_json() + "\n" if cfg.output_format == "json" else report.to_csv())
    return 0


def _instance(text):
    problem, sep, n = text.rpartition(":")
    if not sep:
        raise ConfigError(f"instances look like PROBLEM:N, got {text!r}")
    try:
        return problem, int(n)
    except ValueError:
        raise ConfigError(f"bad size in {text!r}") from None


def cmd_stats_table(args):
    instances = [_instance(t) for t in args.instances]
    table = stats_table(instances, runs=args.runs, seed=args.seed)
    print(format_table(table))
    if args.output:
        rows = [r for t in table for r in t["rows"]]
        AggregateReport.from_rows(rows).write(args.output)
    return 0


def cmd_speedup(args):
    base = read_results(args.baseline)
    for path in args.parallel:
        ratio = compare(base, read_results(path))
        print(f"{path}: speedup {ratio:.3f} vs {args.baseline}")
    return 0


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "stats-table": cmd_stats_table,
            "speedup": cmd_speedup}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail(exc)
    except ValueError as exc:
        # unknown problem names, sizes below minimum, bad engine parameters
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
