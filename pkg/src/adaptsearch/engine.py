"""Sequential Adaptive Search with per-run search counters.

Each iteration projects constraint errors onto variables, picks the worst
non-tabu variable (random among ties), and applies the min-conflict swap
for it.  When that swap does not strictly improve the cost the iteration
counts as a local minimum and the kind's escape policy applies:

* ``"tabu"`` (magic square): freeze the variable for ``tabu_tenure``
  iterations and reset ``reset_fraction`` of the variables once
  ``reset_limit`` variables are frozen at the same time;
* ``"reset"`` (costas, all-interval): partial reset right away.

All-interval drives its walk with a secondary guide: the sum of ``k**4``
over the missing differences ``k``.  It is zero exactly when the true cost
is zero, but it pulls the search towards the rare large differences.  A
variable's selection error there is the best guide gain a swap of it can
reach; the reported cost stays the plain count of repeated differences.

A full restart happens every ``max_iterations`` iterations, at most
``max_restarts`` times.  A communication hook is called every
``comm_interval_k`` iterations; it can stop the walk or hand it a better
configuration to adopt.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from adaptsearch import _kernels as K
from adaptsearch.problems import Configuration, ProblemKind, ProblemSpec
from adaptsearch.rng import Xoshiro256

ESCAPE_POLICIES = {"tabu": K.ESCAPE_TABU, "reset": K.ESCAPE_RESET}


@dataclass(frozen=True)
class EngineParams:
    tabu_tenure: int = 10
    reset_limit: int = 2
    reset_fraction: float = 0.1
    max_iterations: int = 100_000
    max_restarts: int = 10
    comm_interval_k: int = 100
    seed: int = 0
    escape: str = "tabu"
    plateau_moves: bool = False

    def __post_init__(self):
        for name in ("tabu_tenure", "reset_limit", "max_iterations", "comm_interval_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be non-negative")
        if not 0 < self.reset_fraction <= 1:
            raise ValueError(f"reset_fraction must be in (0, 1], got {self.reset_fraction}")
        if self.escape not in ESCAPE_POLICIES:
            raise ValueError(f"escape must be one of {sorted(ESCAPE_POLICIES)}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @classmethod
    def defaults(cls, spec: ProblemSpec, **overrides) -> "EngineParams":
        """Per-benchmark defaults; keyword overrides win."""
        n, nv = spec.n, spec.num_vars
        if spec.kind is ProblemKind.MAGIC_SQUARE:
            # sideways moves plus a short restart window; resets stay rare
            base = dict(tabu_tenure=10, reset_limit=max(2, nv // 10), reset_fraction=0.1,
                        escape="tabu", plateau_moves=True, max_iterations=1000 * n)
        elif spec.kind is ProblemKind.COSTAS:
            base = dict(tabu_tenure=1, reset_limit=1, reset_fraction=0.25, escape="reset",
                        plateau_moves=False, max_iterations=100_000 * n)
        else:
            # about four reshuffled positions works across sizes
            base = dict(tabu_tenure=1, reset_limit=1, reset_fraction=max(0.1, 4 / nv),
                        escape="reset", plateau_moves=True, max_iterations=2000 * n)
        base.update(max_restarts=10, comm_interval_k=100)
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def reset_count(self, num_vars):
        # reshuffling a single position is a no-op, so never go below two
        return max(min(2, num_vars), min(num_vars, math.ceil(self.reset_fraction * num_vars)))


@dataclass
class TabuMemory:
    """Per-variable freeze deadlines; variable ``v`` is tabu while ``frozen_until[v] > iteration``."""

    frozen_until: np.ndarray
    iteration: int = 0

    @classmethod
    def empty(cls, num_vars):
        return cls(np.zeros(num_vars, dtype=np.int64), 0)

    def freeze(self, var, tenure):
        self.frozen_until[var] = self.iteration + tenure

    def is_tabu(self, var):
        return bool(self.frozen_until[var] > self.iteration)

    @property
    def tabu_count(self):
        return int(np.count_nonzero(self.frozen_until > self.iteration))

    def clear(self):
        self.frozen_until[:] = 0


@dataclass
class RunStats:
    iterations: int = 0
    local_minima: int = 0
    resets: int = 0
    restarts: int = 0
    tie_candidate_sum: int = 0
    adoptions: int = 0
    wall_time: float = 0.0

    @property
    def same_var_per_iteration(self):
        return self.tie_candidate_sum / self.iterations if self.iterations else 0.0

    @classmethod
    def from_counters(cls, counters, wall_time=0.0):
        return cls(
            iterations=int(counters[K.ITER]),
            local_minima=int(counters[K.LOCAL_MIN]),
            resets=int(counters[K.RESETS]),
            restarts=int(counters[K.RESTARTS]),
            tie_candidate_sum=int(counters[K.TIE_SUM]),
            adoptions=int(counters[K.ADOPTIONS]),
            wall_time=wall_time,
        )

    def counts(self):
        """Every counter except wall time, for determinism checks."""
        return (self.iterations, self.local_minima, self.resets, self.restarts,
                self.tie_candidate_sum, self.adoptions)


class CommDirective:
    """What the communication hook tells the engine to do next."""

    __slots__ = ("action", "configuration")

    CONTINUE = "continue"
    TERMINATE = "terminate"
    ADOPT = "adopt"

    def __init__(self, action, configuration=None):
        self.action = action
        self.configuration = configuration

    @classmethod
    def adopt(cls, configuration):
        return cls(cls.ADOPT, configuration)

    def __eq__(self, other):
        return (isinstance(other, CommDirective) and self.action == other.action
                and self.configuration == other.configuration)

    def __repr__(self):
        if self.action == self.ADOPT:
            return f"CommDirective.adopt(cost={self.configuration.cost})"
        return f"CommDirective({self.action!r})"


CommDirective.Continue = CommDirective(CommDirective.CONTINUE)
CommDirective.Terminate = CommDirective(CommDirective.TERMINATE)


@dataclass
class SolveOutcome:
    solved: bool
    solution: Optional[Configuration]
    stats: RunStats
    terminated_by_peer: bool = False


def no_hook(engine):
    return CommDirective.Continue


class Engine:
    """Mutable search state of one walk.

    ``counters`` is written in place by the compiled loop, so other threads
    can watch progress (iterations, current cost) while the walk runs.
    """

    def __init__(self, spec: ProblemSpec, params: EngineParams, rank: int = 0):
        self.spec = spec
        self.params = params
        self.rank = rank
        self.rng = Xoshiro256(params.seed)
        nv = spec.num_vars
        self.values = np.array(spec.base_domain, dtype=np.int64)
        self.rng.shuffle(self.values)
        self.aux = spec.new_aux()
        self.errs = np.zeros(nv, dtype=np.int64)
        self.frozen = np.zeros(nv, dtype=np.int64)
        self.counters = np.zeros(K.N_COUNTERS, dtype=np.int64)
        self._buf = np.zeros(nv, dtype=np.int64)
        self._buf2 = np.zeros(nv, dtype=np.int64)
        self._policy = ESCAPE_POLICIES[params.escape]
        self._reset_count = params.reset_count(nv)
        self.status = K.RUNNING
        self.elapsed = 0.0
        K.refresh(spec.code, spec.n, self.values, self.aux, self.counters)
        if self.counters[K.COST] == 0:
            self.status = K.SOLVED

    # -- views --------------------------------------------------------------
    @property
    def cost(self):
        return int(self.counters[K.COST])

    @property
    def iterations(self):
        return int(self.counters[K.ITER])

    @property
    def tabu(self):
        return TabuMemory(self.frozen, self.iterations)

    @property
    def solved(self):
        return self.status == K.SOLVED

    @property
    def exhausted(self):
        return self.status == K.EXHAUSTED

    def configuration(self):
        return Configuration(self.values.copy(), self.cost)

    def stats(self):
        return RunStats.from_counters(self.counters, self.elapsed)

    # -- transitions --------------------------------------------------------
    def _kernel_args(self):
        p = self.params
        return (self.spec.code, self.spec.n, self.values, self.aux, self.errs, self.frozen,
                self.counters, self.rng.state, self._buf, self._buf2,
                p.tabu_tenure, p.reset_limit, self._reset_count, self._policy,
                p.max_iterations, p.max_restarts)

    def step(self):
        """Run exactly one iteration (or the restart/reset it triggers)."""
        if self.status == K.RUNNING:
            self.status = int(K.step_kernel(*self._kernel_args(), self.params.plateau_moves))
        return self.status

    def advance(self, steps):
        """Run up to ``steps`` iterations; stops early when solved or out of budget."""
        if self.status == K.RUNNING:
            t0 = time.perf_counter()
            self.status = int(K.run_chunk(*self._kernel_args(), steps, self.params.plateau_moves))
            self.elapsed += time.perf_counter() - t0
        return self.status

    def partial_reset(self):
        K.partial_reset_kernel(self.spec.code, self.spec.n, self.values, self.aux, self.frozen,
                               self.counters, self.rng.state, self._reset_count,
                               self._buf, self._buf2)
        self._resync_status()

    def restart(self):
        K.restart_kernel(self.spec.code, self.spec.n, self.values, self.aux, self.frozen,
                         self.counters, self.rng.state)
        self._resync_status()

    def adopt(self, payload: Configuration):
        """Replace the current configuration by a strictly better one.

        Returns False (and changes nothing) when the payload is no longer
        better than the current cost.
        """
        if payload.cost >= self.cost:
            return False
        values = self.spec.check_permutation(payload.values)
        self.values[:] = values
        self.frozen[:] = 0
        K.refresh(self.spec.code, self.spec.n, self.values, self.aux, self.counters)
        if self.counters[K.COST] != payload.cost:
            raise ValueError(f"payload claims cost {payload.cost}, "
                             f"recomputed {self.counters[K.COST]}")
        self.counters[K.ADOPTIONS] += 1
        self._resync_status()
        return True

    def _resync_status(self):
        if self.counters[K.COST] == 0:
            self.status = K.SOLVED
        elif self.status == K.SOLVED:
            self.status = K.RUNNING

    def solve(self, comm_hook: Callable = no_hook) -> SolveOutcome:
        k = self.params.comm_interval_k
        by_peer = False
        while self.status == K.RUNNING:
            self.advance(k)
            if self.status != K.RUNNING:
                break
            directive = comm_hook(self)
            if directive.action == CommDirective.TERMINATE:
                by_peer = True
                break
            if directive.action == CommDirective.ADOPT:
                self.adopt(directive.configuration)
        if self.status == K.SOLVED:
            # final communication step so that peers learn about the solution
            comm_hook(self)
        return self.outcome(terminated_by_peer=by_peer)

    def outcome(self, terminated_by_peer=False):
        solved = self.status == K.SOLVED
        return SolveOutcome(
            solved=solved,
            solution=self.configuration() if solved else None,
            stats=self.stats(),
            terminated_by_peer=terminated_by_peer and not solved,
        )


def solve(spec: ProblemSpec, params: EngineParams, comm_hook: Callable = no_hook) -> SolveOutcome:
    return Engine(spec, params).solve(comm_hook)


def warm_up(spec: ProblemSpec):
    """Load (or compile) the search kernels so that later timings exclude it."""
    Engine(spec, EngineParams.defaults(spec, seed=1)).advance(2)


# -- single operations, exposed for inspection and testing -----------------

def search_errors(spec: ProblemSpec, config):
    """Per-variable errors the walk selects on (see the module notes)."""
    values = spec.check_permutation(getattr(config, "values", config))
    aux = spec.new_aux()
    K.fill_aux(spec.code, spec.n, values, aux)
    out = np.zeros(spec.num_vars, dtype=np.int64)
    K.search_errors_into(spec.code, spec.n, values, aux, out)
    return out


def select_worst_variable(errors, tabu: TabuMemory, rng: Xoshiro256):
    """Return ``(var, tie_count)`` among non-tabu variables of maximal error.

    Raises ``AllTabuError`` when every variable is tabu; the engine answers
    that with a forced partial reset.
    """
    errs = np.asarray(errors, dtype=np.int64)
    buf = np.zeros(errs.shape[0], dtype=np.int64)
    var, ties = K.select_worst(errs, tabu.frozen_until, tabu.iteration, rng.state, buf)
    if var < 0:
        raise AllTabuError("every variable is tabu")
    return int(var), int(ties)


class AllTabuError(RuntimeError):
    pass


def select_min_conflict_move(spec: ProblemSpec, config, var, rng: Xoshiro256):
    """Best swap partner for ``var`` (random among equal deltas) and its delta.

    For all-interval the delta is measured on the guide, not on the cost.
    """
    values = spec.check_permutation(getattr(config, "values", config))
    if not 0 <= var < spec.num_vars:
        raise IndexError(f"variable index {var} out of range")
    aux = spec.new_aux()
    K.fill_aux(spec.code, spec.n, values, aux)
    buf = np.zeros(spec.num_vars, dtype=np.int64)
    j, delta, _ = K.select_move(spec.code, spec.n, values, aux, int(var), rng.state, buf)
    return int(j), int(delta)


def partial_reset(spec: ProblemSpec, config, reset_fraction, rng: Xoshiro256) -> Configuration:
    """Shuffle ``ceil(reset_fraction * num_vars)`` random positions among themselves."""
    values = spec.check_permutation(getattr(config, "values", config)).copy()
    if not 0 < reset_fraction <= 1:
        raise ValueError("reset_fraction must be in (0, 1]")
    count = replace(EngineParams(), reset_fraction=reset_fraction).reset_count(spec.num_vars)
    K.reshuffle_subset(values, count, rng.state,
                       np.zeros(spec.num_vars, dtype=np.int64),
                       np.zeros(spec.num_vars, dtype=np.int64))
    return Configuration.from_values(spec, values)


def restart(spec: ProblemSpec, rng: Xoshiro256) -> Configuration:
    """A fresh uniformly random configuration."""
    return Configuration.from_values(spec, rng.permutation(spec.base_domain))
