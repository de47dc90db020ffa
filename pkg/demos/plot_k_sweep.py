"""
Sweeping the communication interval
===================================

``run_batch`` repeats a configuration with derived seeds and keeps one
row per run.  Passing several ``k`` values yields one aggregate per value.
"""

from adaptsearch.bench import ExperimentConfig, format_table, run_batch, stats_table

cfg = ExperimentConfig(problem="all-interval", n=30, variant="poc", workers=4,
                       k=(10, 100, 1000), runs=10, seed=3)
report = run_batch(cfg)

for agg in report.aggregates:
    print(f"k={agg['k']:>5}: solved {agg['solved']}/{agg['runs']}, "
          f"median {agg['wall_ms_median']:.1f} ms, speedup vs k=10 {agg['speedup']:.2f}")

# the per-run rows are plain dicts, ready for csv or pandas
print(report.rows[0])
print(report.to_csv().splitlines()[0])

# a small version of the sequential characterization table
table = stats_table([("magic-square", 10), ("costas", 12), ("all-interval", 20)], runs=10)
print(format_table(table))
