import sys
import threading

import numpy as np
import pytest

from adaptsearch import _kernels as K
from adaptsearch.engine import CommDirective, EngineParams, solve
from adaptsearch.problems import Configuration, build_problem, full_cost
from adaptsearch.rng import Xoshiro256
from adaptsearch.runtime import (EMPTY, TORN, Mailbox, ParallelParams, PocNode, Received, Slot,
                                 TerminationBoard, TreeTopology, _Worker, poc_hook, run_lockstep,
                                 run_parallel, tdo_hook)
from adaptsearch.validators import check_solution


def test_binary_tree_of_15():
    t = TreeTopology(15, 2)
    assert t.parent(0) is None
    assert t.children(0) == [1, 2]
    assert t.children(6) == [13, 14]
    assert t.parent(14) == 6
    assert t.height == 3
    assert t.leaves() == list(range(7, 15))
    assert len(t.edges()) == 14


def test_ragged_tree():
    t = TreeTopology(6, 3)
    assert t.children(0) == [1, 2, 3]
    assert t.children(1) == [4, 5]
    assert t.children(2) == []
    assert t.depth(5) == 2


def test_topology_rejects_bad_sizes():
    with pytest.raises(ValueError):
        TreeTopology(0)
    with pytest.raises(ValueError):
        TreeTopology(3, 0)


# -- slots -------------------------------------------------------------------

def test_slot_empty_then_latest():
    s = Slot(3)
    assert s.read() is EMPTY
    s.write([1, 2, 3], 4, origin=2)
    s.write([3, 2, 1], 1, origin=5)
    got = s.read()
    assert isinstance(got, Received)
    assert got.values.tolist() == [3, 2, 1] and got.cost == 1 and got.origin == 5
    assert got.version == 4


def test_slot_reports_write_in_progress():
    s = Slot(2)
    s.write([0, 1], 1, 0)
    s.version[0] += 1  # writer stalled half way
    assert s.read() is TORN


class _InterruptingBuffers:
    """Buffer proxy that lets a writer run while the reader is copying."""

    def __init__(self, slot, on_read):
        self.slot = slot
        self.real = slot.buffers
        self.on_read = on_read

    def __getitem__(self, key):
        row = self.real[key]
        self.on_read()
        return row

    def __setitem__(self, key, value):
        self.real[key] = value


def test_slot_detects_overwrite_during_copy():
    s = Slot(2)
    s.write([0, 1], 1, 0)
    fired = []

    def writer_sneaks_in():
        if not fired:
            fired.append(1)
            s.write([1, 0], 7, 1)
            s.write([1, 0], 7, 1)

    s.buffers = _InterruptingBuffers(s, writer_sneaks_in)
    assert s.read() is TORN
    assert s.read_retry().cost == 7


def _payload_pool(spec, count, seed):
    rng = Xoshiro256(seed)
    pool = []
    for _ in range(count):
        v = rng.permutation(spec.base_domain)
        pool.append((v, full_cost(spec, v)))
    return pool


def slot_stress(cycles, switch=1e-6, seed=0):
    """Concurrent writer and reader on one slot; returns (accepted, torn, bad)."""
    spec = build_problem("costas", 12)
    pool = _payload_pool(spec, 64, seed)
    known = {tuple(v.tolist()): c for v, c in pool}
    slot = Slot(spec.num_vars)
    done = threading.Event()
    tally = {"accepted": 0, "torn": 0, "bad": 0}

    def writer():
        for i in range(cycles):
            v, c = pool[i % len(pool)]
            slot.write(v, c, 0)
        done.set()

    def reader():
        while not done.is_set():
            got = slot.read()
            if got is EMPTY:
                continue
            if got is TORN:
                tally["torn"] += 1
                continue
            tally["accepted"] += 1
            key = tuple(got.values.tolist())
            if sorted(key) != list(range(1, 13)) or known.get(key) != got.cost:
                tally["bad"] += 1

    old = sys.getswitchinterval()
    sys.setswitchinterval(switch)
    try:
        threads = [threading.Thread(target=writer), threading.Thread(target=reader)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    finally:
        sys.setswitchinterval(old)
    return tally


def test_slot_stress_no_torn_payload_accepted():
    tally = slot_stress(100_000)
    assert tally["bad"] == 0
    assert tally["accepted"] > 0


# -- termination board -------------------------------------------------------

def test_board_first_writer_wins():
    board = TerminationBoard()
    start = threading.Barrier(8)
    results = {}

    def contender(rank):
        start.wait()
        results[rank] = board.publish(rank, 100 + rank)

    threads = [threading.Thread(target=contender, args=(r,)) for r in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    winners = [r for r, ok in results.items() if ok]
    assert len(winners) == 1
    assert board.winner == winners[0] and board.winner_iterations == 100 + winners[0]
    assert not board.publish(99, 1)


class StubEngine:
    """Frozen-cost stand-in for an engine: never moves, adopts strictly better payloads."""

    def __init__(self, rank, cost, n=4):
        self.rank = rank
        self.cost = cost
        self.values = np.full(n, rank, dtype=np.int64)
        self.counters = np.zeros(K.N_COUNTERS, dtype=np.int64)
        self.solved = False

    @property
    def iterations(self):
        return int(self.counters[K.ITER])

    def configuration(self):
        return Configuration(self.values.copy(), self.cost)

    def advance(self, k):
        self.counters[K.ITER] += k
        return K.RUNNING

    def adopt(self, cfg):
        if cfg.cost >= self.cost:
            return False
        self.values = cfg.values.copy()
        self.cost = cfg.cost
        return True


def test_tdo_hook_examples():
    board = TerminationBoard()
    e = StubEngine(3, 5)
    assert tdo_hook(e, board) is CommDirective.Continue
    e.cost = 0
    assert tdo_hook(e, board) is CommDirective.Terminate
    assert board.winner == 3
    other = StubEngine(1, 9)
    assert tdo_hook(other, board) is CommDirective.Terminate
    assert board.winner == 3


def wave(leaf, num_workers=15, rounds=8):
    """Run PoC hooks over stub engines; returns per-round known-best per node."""
    topo = TreeTopology(num_workers, 2)
    engines = [StubEngine(r, 100 + r) for r in range(num_workers)]
    engines[leaf].cost = 1
    board = TerminationBoard()
    mailboxes = [Mailbox(r, topo, 4) for r in range(num_workers)]
    nodes = [PocNode(r, topo, mailboxes) for r in range(num_workers)]
    workers = [_Worker(e, (lambda nd: (lambda eng: poc_hook(eng, nd, board)))(nodes[e.rank]))
               for e in engines]
    history = []

    def snapshot(_):
        history.append([nodes[r].known_best(engines[r].cost) for r in range(num_workers)])

    run_lockstep(workers, 10, max_rounds=rounds, on_round=snapshot)
    return history


@pytest.mark.parametrize("leaf", range(7, 15))
def test_poc_wave_reaches_root_and_everyone(leaf):
    history = wave(leaf)
    root_round = next(i + 1 for i, known in enumerate(history) if known[0] == 1)
    all_round = next(i + 1 for i, known in enumerate(history) if max(known) == 1)
    assert root_round <= 3
    assert all_round <= 6
    for before, after in zip(history, history[1:]):
        assert all(a <= b for a, b in zip(after, before))


def test_poc_adoption_is_strict():
    topo = TreeTopology(2, 2)
    mailboxes = [Mailbox(r, topo, 4) for r in range(2)]
    node = PocNode(0, topo, mailboxes)
    board = TerminationBoard()
    e = StubEngine(0, 5)
    mailboxes[0].from_child[1].write(np.zeros(4, dtype=np.int64), 5, 1)
    assert poc_hook(e, node, board).action == CommDirective.CONTINUE
    mailboxes[0].from_child[1].write(np.ones(4, dtype=np.int64), 4, 1)
    d = poc_hook(e, node, board)
    assert d.action == CommDirective.ADOPT and d.configuration.cost == 4
    # the same payload is not fresh any more
    assert poc_hook(e, node, board).action == CommDirective.CONTINUE


# -- full runs ---------------------------------------------------------------

@pytest.mark.parametrize("kind,n", [("costas", 11), ("magic-square", 6), ("all-interval", 14)])
def test_single_worker_matches_sequential(kind, n):
    spec = build_problem(kind, n)
    params = EngineParams.defaults(spec, seed=77)
    seq = solve(spec, params)
    for variant in ("tdo", "poc"):
        out = run_parallel(spec, params, ParallelParams(variant=variant, num_workers=1))
        assert out.worker_stats[0].counts() == seq.stats.counts()
        assert out.solution == seq.solution


@pytest.mark.parametrize("variant", ["tdo", "poc"])
@pytest.mark.parametrize("scheduler", ["threads", "lockstep"])
def test_parallel_runs_solve_and_stop_quickly(variant, scheduler):
    spec = build_problem("costas", 12)
    k = 50
    for seed in range(5):
        params = EngineParams.defaults(spec, seed=seed)
        out = run_parallel(spec, params, ParallelParams(variant=variant, num_workers=4,
                                                        comm_interval_k=k, scheduler=scheduler))
        assert out.solved
        assert check_solution(spec.kind, spec.n, out.solution.values)
        assert max(out.overrun) <= 2 * k


def test_lockstep_winner_is_not_behind():
    spec = build_problem("magic-square", 6)
    k = 20
    for seed in range(5):
        out = run_parallel(spec, EngineParams.defaults(spec, seed=seed),
                           ParallelParams(variant="tdo", num_workers=4, comm_interval_k=k,
                                          scheduler="lockstep"))
        win = out.winner_stats.iterations
        others = [s.iterations for r, s in enumerate(out.worker_stats) if r != out.winner_rank]
        assert win <= max(others) + k


def test_lockstep_is_reproducible():
    spec = build_problem("magic-square", 6)
    pp = ParallelParams(variant="poc", num_workers=4, comm_interval_k=10, scheduler="lockstep")
    a = run_parallel(spec, EngineParams.defaults(spec, seed=3), pp)
    b = run_parallel(spec, EngineParams.defaults(spec, seed=3), pp)
    assert [s.counts() for s in a.worker_stats] == [s.counts() for s in b.worker_stats]
    assert a.winner_rank == b.winner_rank and a.propagations == b.propagations


def test_parallel_params_validation():
    with pytest.raises(ValueError):
        ParallelParams(variant="gossip")
    with pytest.raises(ValueError):
        ParallelParams(num_workers=0)
    with pytest.raises(ValueError):
        ParallelParams(scheduler="fibers")
