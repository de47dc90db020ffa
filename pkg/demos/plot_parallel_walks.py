"""
Parallel walks with and without cooperation
===========================================

Run several walks on a magic square.  With termination detection only
(``tdo``) the walks are independent; with ``poc`` they also pass their
best configurations along a binary tree every ``k`` iterations.
"""

from adaptsearch import EngineParams, ParallelParams, build_problem, run_parallel

spec = build_problem("magic-square", 12)
params = EngineParams.defaults(spec, seed=1)

for variant in ("tdo", "poc"):
    pp = ParallelParams(variant=variant, num_workers=4, comm_interval_k=10)
    out = run_parallel(spec, params, pp)
    print(f"{variant}: worker {out.winner_rank} won after {out.wall_time * 1000:.0f} ms, "
          f"{out.adoptions} adoptions, {out.propagations} messages")
    # how far each worker ran after the winner raised the flag
    print("   overrun per worker:", out.overrun)

# with one worker both variants reduce to the sequential walk
one = run_parallel(spec, params, ParallelParams(variant="poc", num_workers=1))
print("single worker iterations:", one.worker_stats[0].iterations)

# the lockstep scheduler runs the same protocol in rounds, reproducibly
pp = ParallelParams(variant="poc", num_workers=4, comm_interval_k=10, scheduler="lockstep")
a = run_parallel(spec, params, pp)
b = run_parallel(spec, params, pp)
print("lockstep reproducible:", [s.counts() for s in a.worker_stats] ==
      [s.counts() for s in b.worker_stats])
