"""
One walk on a Costas array
==========================

Build a problem, run a single Adaptive Search walk, and look at the
counters it keeps along the way.
"""

from adaptsearch import EngineParams, build_problem, solve
from adaptsearch.validators import check_solution

# a Costas array of order 12: a permutation whose difference triangle
# has no repeated value in any row
spec = build_problem("costas", 12)
params = EngineParams.defaults(spec, seed=7)
print(params)

out = solve(spec, params)
print("solved:", out.solved)
print("permutation:", out.solution.values.tolist())
print("independent check:", check_solution(spec.kind, spec.n, out.solution.values))

# every local minimum triggers a partial reset for this problem, so the
# two counters agree exactly
st = out.stats
print(f"iterations {st.iterations}, local minima {st.local_minima}, resets {st.resets}")
print(f"candidates per iteration {st.same_var_per_iteration:.2f}")

# the walk is a pure function of the seed
again = solve(spec, params)
print("same seed, same counters:", again.stats.counts() == st.counts())
