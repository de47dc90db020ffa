"""Direct validity checks for each benchmark.

These are written from the textbook definitions and share no code with
the cost functions, so they can vouch for anything the solver reports.
"""

import itertools

import numpy as np


def is_magic_square(values, n):
    grid = np.asarray(values, dtype=np.int64).reshape(n, n)
    if sorted(grid.ravel().tolist()) != list(range(1, n * n + 1)):
        return False
    target = n * (n * n + 1) // 2
    lines = list(grid.sum(axis=0)) + list(grid.sum(axis=1))
    lines += [np.trace(grid), np.trace(np.fliplr(grid))]
    return all(s == target for s in lines)


def is_costas(values):
    seq = [int(x) for x in values]
    n = len(seq)
    if sorted(seq) != list(range(1, n + 1)):
        return False
    for d in range(1, n):
        row = [seq[i + d] - seq[i] for i in range(n - d)]
        if len(set(row)) != len(row):
            return False
    return True


def is_all_interval(values):
    seq = [int(x) for x in values]
    n = len(seq)
    if sorted(seq) != list(range(n)):
        return False
    diffs = {abs(b - a) for a, b in zip(seq, seq[1:])}
    return diffs == set(range(1, n))


def check_solution(kind, n, values):
    """Validate ``values`` as a solution of the benchmark ``kind`` of size ``n``."""
    from adaptsearch.problems import ProblemKind

    kind = ProblemKind.parse(kind)
    if kind is ProblemKind.MAGIC_SQUARE:
        return is_magic_square(values, n)
    if len(values) != n:
        return False
    if kind is ProblemKind.COSTAS:
        return is_costas(values)
    return is_all_interval(values)


def enumerate_costas(n):
    """All Costas permutations of order ``n`` by exhaustive search (small n only)."""
    return [p for p in itertools.permutations(range(1, n + 1)) if is_costas(p)]
