"""Parallel walks with emulated one-sided communication.

Two cooperation schemes run ``P`` engines side by side:

* TDO (termination detection only): independent walks; every ``k``
  iterations a worker polls a shared termination flag.  The first worker
  to reach cost 0 sets the flag and publishes its solution.
* PoC (propagation of configurations): the same poll, plus an exchange of
  best-cost configurations with the parent and children of a k-ary tree.
  A worker adopts a received configuration only when it is strictly
  better than its own.

Remote memory is modelled by :class:`Slot`: a single-writer buffer with a
sequence counter.  Writers never wait for readers and readers never block
writers; a reader keeps a payload only if the counter was the same even
number before and after copying it.

Workers are threads by default (the compiled search loop releases the
GIL).  ``scheduler="lockstep"`` instead runs every worker for ``k``
iterations per round, in rank order, in the calling thread, which makes
protocol behaviour reproducible.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from adaptsearch import _kernels as K
from adaptsearch.engine import CommDirective, Engine, EngineParams, RunStats
from adaptsearch.problems import Configuration, ProblemSpec, full_cost
from adaptsearch.rng import worker_seed
from adaptsearch.validators import check_solution

VARIANTS = ("tdo", "poc")


class TreeTopology:
    """k-ary tree over ranks ``0..P-1`` with rank 0 as root."""

    def __init__(self, num_workers, arity=2):
        if num_workers < 1:
            raise ValueError("need at least one worker")
        if arity < 1:
            raise ValueError("arity must be positive")
        self.num_workers = num_workers
        self.arity = arity

    def parent(self, rank):
        return None if rank == 0 else (rank - 1) // self.arity

    def children(self, rank):
        first = self.arity * rank + 1
        return list(range(first, min(first + self.arity, self.num_workers)))

    def depth(self, rank):
        d = 0
        while rank:
            rank = (rank - 1) // self.arity
            d += 1
        return d

    @property
    def height(self):
        return max(self.depth(r) for r in range(self.num_workers))

    def leaves(self):
        return [r for r in range(self.num_workers) if not self.children(r)]

    def edges(self):
        return [(self.parent(r), r) for r in range(1, self.num_workers)]


# -- one-sided slots --------------------------------------------------------

EMPTY = "empty"
TORN = "torn"


@dataclass
class Received:
    values: np.ndarray
    cost: int
    origin: int
    version: int

    def configuration(self):
        return Configuration(self.values, self.cost)


class Slot:
    """Versioned double buffer written by one remote peer.

    The counter is odd while a write is in progress.  Writes alternate
    between the two buffers, so the copy belonging to the last stable
    version is never the one being overwritten by the next write.
    """

    def __init__(self, num_vars):
        self.version = np.zeros(1, dtype=np.int64)
        self.buffers = np.zeros((2, num_vars), dtype=np.int64)
        self.meta = np.zeros((2, 2), dtype=np.int64)  # cost, origin rank
        self.writes = 0

    def write(self, values, cost, origin):
        v = int(self.version[0])
        b = (v // 2 + 1) % 2
        self.version[0] = v + 1
        self.buffers[b, :] = values
        self.meta[b, 0] = cost
        self.meta[b, 1] = origin
        self.version[0] = v + 2
        self.writes += 1

    def read(self):
        """Return a :class:`Received`, or ``EMPTY`` / ``TORN``."""
        v1 = int(self.version[0])
        if v1 == 0:
            return EMPTY
        if v1 % 2:
            return TORN
        b = (v1 // 2) % 2
        values = self.buffers[b].copy()
        cost = int(self.meta[b, 0])
        origin = int(self.meta[b, 1])
        if int(self.version[0]) != v1:
            return TORN
        return Received(values, cost, origin, v1)

    def read_retry(self):
        got = self.read()
        if got is TORN:
            got = self.read()
        return got


class Mailbox:
    """Incoming slots of one worker: one from its parent, one per child."""

    def __init__(self, rank, topology, num_vars):
        self.rank = rank
        parent = topology.parent(rank)
        self.from_parent = Slot(num_vars) if parent is not None else None
        self.from_child = {c: Slot(num_vars) for c in topology.children(rank)}

    def incoming(self):
        if self.from_parent is not None:
            yield "parent", self.from_parent
        for slot in self.from_child.values():
            yield "child", slot


class TerminationBoard:
    """Set-once termination flag with the winner's identity and solution.

    ``watch`` holds the live counter arrays of all engines; when the flag
    is set their iteration counts are snapshotted, which bounds how far
    each worker runs past the termination event.
    """

    def __init__(self, watch=()):
        self._lock = threading.Lock()
        self._set = False
        self.winner = None
        self.winner_iterations = None
        self.solution = None
        self.snapshot = None
        self.watch = list(watch)

    @property
    def is_set(self):
        return self._set

    def publish(self, rank, iterations, solution=None):
        """First writer wins; returns True for the winning call only."""
        with self._lock:
            if self._set:
                return False
            self.snapshot = [int(c[K.ITER]) for c in self.watch]
            self.winner = rank
            self.winner_iterations = iterations
            self.solution = solution
            self._set = True
            return True


# -- communication hooks ----------------------------------------------------

def tdo_hook(engine, board):
    if engine.cost == 0:
        board.publish(engine.rank, engine.iterations, engine.configuration())
        return CommDirective.Terminate
    if board.is_set:
        return CommDirective.Terminate
    return CommDirective.Continue


class PocNode:
    """Per-worker propagation state for the tree exchange."""

    def __init__(self, rank, topology, mailboxes, spec=None, verify=False):
        self.rank = rank
        self.topology = topology
        self.mailboxes = mailboxes
        self.mailbox = mailboxes[rank]
        self.spec = spec
        self.verify = verify
        self.last_sent_up = None
        self.last_sent_down = None
        self.seen = {}
        self.propagations = 0
        self.rejected = 0

    def receive(self):
        """Fresh payloads since the previous step, as ``(direction, Received)``."""
        fresh = []
        for direction, slot in self.mailbox.incoming():
            got = slot.read_retry()
            if got is EMPTY or got is TORN:
                continue
            if got.version <= self.seen.get(id(slot), 0):
                continue
            self.seen[id(slot)] = got.version
            if self.verify and full_cost(self.spec, got.values) != got.cost:
                self.rejected += 1
                continue
            fresh.append((direction, got))
        return fresh

    def send_up(self, config):
        parent = self.topology.parent(self.rank)
        self.mailboxes[parent].from_child[self.rank].write(config.values, config.cost, self.rank)
        self.last_sent_up = config.cost
        self.propagations += 1

    def send_down(self, config):
        for c in self.topology.children(self.rank):
            self.mailboxes[c].from_parent.write(config.values, config.cost, self.rank)
            self.propagations += 1
        self.last_sent_down = config.cost

    def known_best(self, own_cost):
        """Lowest cost present in this worker's memory (own walk or mailbox)."""
        best = own_cost
        for _, slot in self.mailbox.incoming():
            got = slot.read_retry()
            if isinstance(got, Received):
                best = min(best, got.cost)
        return best


def _better(cost, last):
    return last is None or cost < last


def poc_hook(engine, node, board):
    directive = tdo_hook(engine, board)
    if directive.action == CommDirective.TERMINATE:
        return directive

    fresh = node.receive()
    best_cfg = None
    source = None
    if fresh:
        direction, got = min(fresh, key=lambda item: item[1].cost)
        if got.cost < engine.cost:
            best_cfg = got.configuration()
            source = direction
    if best_cfg is None:
        best_cfg = engine.configuration()
        directive = CommDirective.Continue
    else:
        directive = CommDirective.adopt(best_cfg)

    # the wave: relay what came from below upwards and from above downwards,
    # and send anything better than what already went that way
    if node.topology.parent(node.rank) is not None:
        if source == "child" or _better(best_cfg.cost, node.last_sent_up):
            node.send_up(best_cfg)
    if node.topology.children(node.rank):
        if source == "parent" or _better(best_cfg.cost, node.last_sent_down):
            node.send_down(best_cfg)
    return directive


# -- orchestration ----------------------------------------------------------

@dataclass(frozen=True)
class ParallelParams:
    variant: str = "tdo"
    num_workers: int = 1
    arity: int = 2
    comm_interval_k: Optional[int] = None
    scheduler: str = "threads"
    verify_payloads: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.num_workers < 1:
            raise ValueError("num_workers must be at least 1")
        if self.arity < 1:
            raise ValueError("arity must be positive")
        if self.comm_interval_k is not None and self.comm_interval_k < 1:
            raise ValueError("comm_interval_k must be positive")
        if self.scheduler not in ("threads", "lockstep"):
            raise ValueError("scheduler must be 'threads' or 'lockstep'")


@dataclass
class ParallelOutcome:
    solved: bool
    winner_rank: Optional[int]
    solution: Optional[Configuration]
    wall_time: float
    worker_stats: List[RunStats]
    adoptions: int = 0
    propagations: int = 0
    # iterations each worker ran after the termination flag was set
    overrun: List[int] = field(default_factory=list)

    @property
    def winner_stats(self):
        return None if self.winner_rank is None else self.worker_stats[self.winner_rank]


class _Worker:
    def __init__(self, engine, hook):
        self.engine = engine
        self.hook = hook
        self.terminated = False


def make_engines(spec, engine_params, parallel_params):
    k = parallel_params.comm_interval_k or engine_params.comm_interval_k
    base = replace(engine_params, comm_interval_k=k)
    return [Engine(spec, base.with_seed(worker_seed(engine_params.seed, r)), rank=r)
            for r in range(parallel_params.num_workers)]


def _make_hooks(spec, engines, parallel_params, board):
    topo = TreeTopology(parallel_params.num_workers, parallel_params.arity)
    if parallel_params.variant == "tdo":
        return [lambda e: tdo_hook(e, board) for _ in engines], []
    mailboxes = [Mailbox(r, topo, spec.num_vars) for r in range(len(engines))]
    nodes = [PocNode(r, topo, mailboxes, spec, parallel_params.verify_payloads)
             for r in range(len(engines))]
    hooks = [(lambda node: (lambda e: poc_hook(e, node, board)))(nodes[r])
             for r in range(len(engines))]
    return hooks, nodes


def _run_threads(workers):
    def body(w):
        w.terminated = w.engine.solve(w.hook).terminated_by_peer

    if len(workers) == 1:
        body(workers[0])
        return
    threads = [threading.Thread(target=body, args=(w,), daemon=True) for w in workers]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def run_lockstep(workers, k, order=None, max_rounds=None, on_round=None):
    """Round-based driver: each live worker advances ``k`` iterations, then communicates.

    ``on_round(round_number)`` runs after every round.  Returns the number
    of rounds executed.
    """
    ranks = list(order) if order is not None else list(range(len(workers)))
    live = set(ranks)
    rounds = 0
    while live and (max_rounds is None or rounds < max_rounds):
        rounds += 1
        for r in ranks:
            if r not in live:
                continue
            w = workers[r]
            status = w.engine.advance(k)
            if status != K.RUNNING:
                if status == K.SOLVED:
                    w.hook(w.engine)
                live.discard(r)
                continue
            directive = w.hook(w.engine)
            if directive.action == CommDirective.TERMINATE:
                w.terminated = True
                live.discard(r)
            elif directive.action == CommDirective.ADOPT:
                w.engine.adopt(directive.configuration)
                if w.engine.solved:
                    w.hook(w.engine)
                    live.discard(r)
        if on_round is not None:
            on_round(rounds)
    return rounds


def run_parallel(spec: ProblemSpec, engine_params: EngineParams,
                 parallel_params: ParallelParams) -> ParallelOutcome:
    """Run ``num_workers`` walks until one solves or all run out of budget."""
    engines = make_engines(spec, engine_params, parallel_params)
    board = TerminationBoard(e.counters for e in engines)
    hooks, nodes = _make_hooks(spec, engines, parallel_params, board)
    workers = [_Worker(e, h) for e, h in zip(engines, hooks)]

    t0 = time.monotonic()
    if parallel_params.scheduler == "lockstep":
        run_lockstep(workers, engines[0].params.comm_interval_k)
    else:
        _run_threads(workers)
    wall = time.monotonic() - t0

    # a walk that starts on a solution never reaches its hook
    if not board.is_set:
        for e in engines:
            if e.solved:
                board.publish(e.rank, e.iterations, e.configuration())
                break

    solution = board.solution
    if solution is not None and not check_solution(spec.kind, spec.n, solution.values):
        raise RuntimeError(f"worker {board.winner} published an invalid solution")

    stats = [e.stats() for e in engines]
    overrun = []
    if board.snapshot is not None:
        overrun = [s.iterations - snap for s, snap in zip(stats, board.snapshot)]
    return ParallelOutcome(
        solved=solution is not None,
        winner_rank=board.winner,
        solution=solution,
        wall_time=wall,
        worker_stats=stats,
        adoptions=sum(s.adoptions for s in stats),
        propagations=sum(n.propagations for n in nodes),
        overrun=overrun,
    )
