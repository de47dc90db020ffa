"""Jitted cost machinery shared by the problem API and the search loop.

Problem kinds are dispatched on an integer code so one compiled loop
serves all benchmarks.  Each kind keeps an auxiliary integer table that
makes swap deltas cheap:

* magic square: ``aux[0]`` holds the 2n+2 line sums (rows, columns,
  diagonal, anti-diagonal);
* costas: ``aux[d, diff + n - 1]`` counts differences in row ``d``
  (rows 1..n-2 are constrained);
* all-interval: ``aux[0, diff]`` counts absolute adjacent differences.

For the difference-based kinds the cost is the total excess count
``sum(max(0, count - 1))``, which equals ``entries - distinct`` per row.
"""

import numpy as np
from numba import njit

from adaptsearch.rng import below, shuffle_inplace

MAGIC_SQUARE = 0
COSTAS = 1
ALL_INTERVAL = 2


def aux_shape(kind, n):
    if kind == MAGIC_SQUARE:
        return (1, 2 * n + 2)
    if kind == COSTAS:
        return (max(n - 1, 1), 2 * n - 1)
    return (1, n)


# --- magic square ------------------------------------------------------------

@njit(cache=True, nogil=True)
def _ms_fill(n, values, line):
    line[:] = 0
    v = 0
    for r in range(n):
        for c in range(n):
            x = values[v]
            line[r] += x
            line[n + c] += x
            if r == c:
                line[2 * n] += x
            if r + c == n - 1:
                line[2 * n + 1] += x
            v += 1


@njit(cache=True, nogil=True)
def _ms_cost(n, line):
    m = n * (n * n + 1) // 2
    total = 0
    for k in range(2 * n + 2):
        total += abs(line[k] - m)
    return total


@njit(cache=True, nogil=True)
def _ms_errors(n, line, out):
    m = n * (n * n + 1) // 2
    diag = abs(line[2 * n] - m)
    anti = abs(line[2 * n + 1] - m)
    v = 0
    for r in range(n):
        row_err = abs(line[r] - m)
        for c in range(n):
            e = row_err + abs(line[n + c] - m)
            if r == c:
                e += diag
            if r + c == n - 1:
                e += anti
            out[v] = e
            v += 1


@njit(cache=True, nogil=True, inline='always')
def _ms_delta_at(n, m, values, line, i, ri, ci, j, rj, cj):
    d = values[j] - values[i]
    delta = 0
    if ri != rj:
        s = line[ri]
        delta += abs(s + d - m) - abs(s - m)
        s = line[rj]
        delta += abs(s - d - m) - abs(s - m)
    if ci != cj:
        s = line[n + ci]
        delta += abs(s + d - m) - abs(s - m)
        s = line[n + cj]
        delta += abs(s - d - m) - abs(s - m)
    di = ri == ci
    if di != (rj == cj):
        s = line[2 * n]
        delta += abs(s + (d if di else -d) - m) - abs(s - m)
    ai = ri + ci == n - 1
    if ai != (rj + cj == n - 1):
        s = line[2 * n + 1]
        delta += abs(s + (d if ai else -d) - m) - abs(s - m)
    return delta


@njit(cache=True, nogil=True)
def _ms_delta(n, values, line, i, j):
    m = n * (n * n + 1) // 2
    return _ms_delta_at(n, m, values, line, i, i // n, i % n, j, j // n, j % n)


@njit(cache=True, nogil=True)
def _ms_select_move(n, values, line, var, rng, buf):
    m = n * (n * n + 1) // 2
    ri = var // n
    ci = var % n
    best = np.int64(1) << 62
    ties = 0
    j = 0
    for rj in range(n):
        for cj in range(n):
            if j != var:
                d = _ms_delta_at(n, m, values, line, var, ri, ci, j, rj, cj)
                if d < best:
                    best = d
                    ties = 0
                if d == best:
                    buf[ties] = j
                    ties += 1
            j += 1
    return buf[below(rng, ties)], best, ties


# --- difference tables (costas rows, all-interval) ---------------------------

@njit(cache=True, nogil=True, inline='always')
def _bump(counts, d, k, step):
    """Apply ``step`` (+1/-1) to a count; return the change in excess."""
    c = counts[d, k]
    counts[d, k] = c + step
    if step > 0:
        return 1 if c >= 1 else 0
    return -1 if c >= 2 else 0


@njit(cache=True, nogil=True, inline='always')
def _swapped(values, x, i, j):
    if x == i:
        return values[j]
    if x == j:
        return values[i]
    return values[x]


@njit(cache=True, nogil=True, inline='always')
def _diff_key(absolute, off, a, b):
    # difference b - a, keyed into a count row
    if absolute:
        return abs(b - a)
    return b - a + off


@njit(cache=True, nogil=True)
def _diff_fill(n, values, counts, absolute, first, last):
    counts[:, :] = 0
    off = n - 1
    for d in range(first, last + 1):
        row = 0 if absolute else d
        for e in range(n - d):
            counts[row, _diff_key(absolute, off, values[e], values[e + d])] += 1


@njit(cache=True, nogil=True)
def _excess(counts):
    total = 0
    for d in range(counts.shape[0]):
        for k in range(counts.shape[1]):
            if counts[d, k] > 1:
                total += counts[d, k] - 1
    return total


@njit(cache=True, nogil=True)
def _diff_errors(n, values, counts, absolute, first, last, weighted, out):
    out[:] = 0
    off = n - 1
    for d in range(first, last + 1):
        row = 0 if absolute else d
        for v in range(n):
            # v sits in the entries starting at v and at v - d
            e = 0
            k1 = -1
            k2 = -1
            if v + d < n:
                k1 = _diff_key(absolute, off, values[v], values[v + d])
                e += counts[row, k1] - 1
            if v - d >= 0:
                k2 = _diff_key(absolute, off, values[v - d], values[v])
                e += counts[row, k2] - 1
            if k1 >= 0 and k1 == k2:
                e -= 1
            if weighted:
                # rows with short gaps weigh more, which also breaks most ties
                e *= n * n - d * d
            out[v] += e


@njit(cache=True, nogil=True)
def _diff_delta(n, values, counts, absolute, first, last, i, j, starts):
    off = n - 1
    delta = 0
    for d in range(first, last + 1):
        row = 0 if absolute else d
        ns = 0
        for cand in (i, i - d, j, j - d):
            if cand >= 0 and cand + d < n:
                dup = False
                for q in range(ns):
                    if starts[q] == cand:
                        dup = True
                if not dup:
                    starts[ns] = cand
                    ns += 1
        for q in range(ns):
            e = starts[q]
            delta += _bump(counts, row, _diff_key(absolute, off, values[e], values[e + d]), -1)
        for q in range(ns):
            e = starts[q]
            nk = _diff_key(absolute, off, _swapped(values, e, i, j), _swapped(values, e + d, i, j))
            delta += _bump(counts, row, nk, 1)
        for q in range(ns):
            e = starts[q]
            nk = _diff_key(absolute, off, _swapped(values, e, i, j), _swapped(values, e + d, i, j))
            counts[row, nk] -= 1
            counts[row, _diff_key(absolute, off, values[e], values[e + d])] += 1
    return delta


@njit(cache=True, nogil=True)
def _diff_select_move(n, values, counts, absolute, first, last, var, rng, buf):
    starts = np.empty(4, dtype=np.int64)
    best = np.int64(1) << 62
    ties = 0
    for j in range(n):
        if j == var:
            continue
        d = _diff_delta(n, values, counts, absolute, first, last, var, j, starts)
        if d < best:
            best = d
            ties = 0
        if d == best:
            buf[ties] = j
            ties += 1
    return buf[below(rng, ties)], best, ties


@njit(cache=True, nogil=True, inline='always')
def _ai_step(counts, k, step):
    # change in the weighted sum of missing differences
    c = counts[0, k]
    counts[0, k] = c + step
    w = k * k * k * k
    if step > 0:
        return -w if c == 0 else 0
    return w if c == 1 else 0


@njit(cache=True, nogil=True)
def _ai_guide_delta(n, values, counts, i, j, starts):
    ns = 0
    for cand in (i, i - 1, j, j - 1):
        if cand >= 0 and cand + 1 < n:
            dup = False
            for q in range(ns):
                if starts[q] == cand:
                    dup = True
            if not dup:
                starts[ns] = cand
                ns += 1
    delta = 0
    for q in range(ns):
        e = starts[q]
        delta += _ai_step(counts, abs(values[e + 1] - values[e]), -1)
    for q in range(ns):
        e = starts[q]
        delta += _ai_step(counts, abs(_swapped(values, e + 1, i, j) - _swapped(values, e, i, j)), 1)
    for q in range(ns):
        e = starts[q]
        counts[0, abs(_swapped(values, e + 1, i, j) - _swapped(values, e, i, j))] -= 1
        counts[0, abs(values[e + 1] - values[e])] += 1
    return delta


@njit(cache=True, nogil=True)
def _ai_select_move(n, values, counts, var, rng, buf):
    starts = np.empty(4, dtype=np.int64)
    best = np.int64(1) << 62
    ties = 0
    for j in range(n):
        if j == var:
            continue
        d = _ai_guide_delta(n, values, counts, var, j, starts)
        if d < best:
            best = d
            ties = 0
        if d == best:
            buf[ties] = j
            ties += 1
    return buf[below(rng, ties)], best, ties


@njit(cache=True, nogil=True)
def _ai_errors(n, values, counts, out):
    # error of v: the best guide improvement reachable by swapping v
    starts = np.empty(4, dtype=np.int64)
    for v in range(n):
        out[v] = np.int64(-1) << 62
    for i in range(n):
        for j in range(i + 1, n):
            g = -_ai_guide_delta(n, values, counts, i, j, starts)
            if g > out[i]:
                out[i] = g
            if g > out[j]:
                out[j] = g


@njit(cache=True, nogil=True)
def _rows(kind, n):
    """(absolute differences?, first row, last row) for a difference-based kind."""
    if kind == COSTAS:
        return False, 1, n - 2
    return True, 1, 1


# --- dispatch ----------------------------------------------------------------

@njit(cache=True, nogil=True)
def fill_aux(kind, n, values, aux):
    if kind == MAGIC_SQUARE:
        _ms_fill(n, values, aux[0])
    else:
        absolute, first, last = _rows(kind, n)
        _diff_fill(n, values, aux, absolute, first, last)


@njit(cache=True, nogil=True)
def cost_from_aux(kind, n, aux):
    if kind == MAGIC_SQUARE:
        return _ms_cost(n, aux[0])
    return _excess(aux)


@njit(cache=True, nogil=True)
def variable_errors_into(kind, n, values, aux, out):
    """Project constraint errors onto variables (``aux`` must be current)."""
    if kind == MAGIC_SQUARE:
        _ms_errors(n, aux[0], out)
    else:
        absolute, first, last = _rows(kind, n)
        _diff_errors(n, values, aux, absolute, first, last, False, out)


@njit(cache=True, nogil=True)
def search_errors_into(kind, n, values, aux, out):
    """Errors that drive variable selection.

    Costas weighs each colliding pair by its row; all-interval uses the
    best guide gain of each variable.
    """
    if kind == ALL_INTERVAL:
        _ai_errors(n, values, aux, out)
    elif kind == COSTAS:
        _diff_errors(n, values, aux, False, 1, n - 2, True, out)
    else:
        variable_errors_into(kind, n, values, aux, out)


@njit(cache=True, nogil=True)
def delta_swap(kind, n, values, aux, i, j):
    """Cost change of swapping positions ``i`` and ``j``.

    Only constraints containing ``i`` or ``j`` are inspected; ``aux`` is
    left unchanged.
    """
    if i == j:
        return 0
    if kind == MAGIC_SQUARE:
        return _ms_delta(n, values, aux[0], i, j)
    absolute, first, last = _rows(kind, n)
    return _diff_delta(n, values, aux, absolute, first, last, i, j,
                       np.empty(4, dtype=np.int64))


@njit(cache=True, nogil=True)
def full_cost_kernel(kind, n, values, aux):
    fill_aux(kind, n, values, aux)
    return cost_from_aux(kind, n, aux)


# --- search loop -----------------------------------------------------------

# counter slots, shared with engine.RunStats
ITER = 0
LOCAL_MIN = 1
RESETS = 2
RESTARTS = 3
TIE_SUM = 4
WINDOW = 5
COST = 6
ADOPTIONS = 7
N_COUNTERS = 8

# escape policies
ESCAPE_TABU = 0
ESCAPE_RESET = 1

# step results
RUNNING = 0
SOLVED = 1
EXHAUSTED = 2

@njit(cache=True, nogil=True)
def select_worst(errs, frozen, iteration, rng, buf):
    """Uniform pick among non-tabu variables of maximal error.

    Returns ``(index, tie_count)``; index is -1 when every variable is tabu.
    """
    best = np.int64(-1) << 62
    ties = 0
    for v in range(errs.shape[0]):
        if frozen[v] > iteration:
            continue
        e = errs[v]
        if e > best:
            best = e
            ties = 0
        if e == best:
            buf[ties] = v
            ties += 1
    if ties == 0:
        return -1, 0
    return buf[below(rng, ties)], ties


@njit(cache=True, nogil=True)
def select_move(kind, n, values, aux, var, rng, buf):
    """Min-conflict swap partner for ``var``: ``(partner, delta)``."""
    if kind == MAGIC_SQUARE:
        return _ms_select_move(n, values, aux[0], var, rng, buf)
    if kind == ALL_INTERVAL:
        return _ai_select_move(n, values, aux, var, rng, buf)
    absolute, first, last = _rows(kind, n)
    return _diff_select_move(n, values, aux, absolute, first, last, var, rng, buf)


@njit(cache=True, nogil=True)
def reshuffle_subset(values, count, rng, idx, picked):
    """Shuffle the values at ``count`` uniformly chosen positions among themselves."""
    size = values.shape[0]
    for q in range(size):
        idx[q] = q
    # partial Fisher-Yates: the first ``count`` slots become a uniform sample
    for q in range(count):
        r = q + below(rng, size - q)
        tmp = idx[q]
        idx[q] = idx[r]
        idx[r] = tmp
    for q in range(count):
        picked[q] = values[idx[q]]
    shuffle_inplace(rng, picked[:count])
    for q in range(count):
        values[idx[q]] = picked[q]


@njit(cache=True, nogil=True)
def refresh(kind, n, values, aux, counters):
    fill_aux(kind, n, values, aux)
    counters[COST] = cost_from_aux(kind, n, aux)


@njit(cache=True, nogil=True)
def partial_reset_kernel(kind, n, values, aux, frozen, counters, rng, reset_count, buf, buf2):
    reshuffle_subset(values, reset_count, rng, buf, buf2)
    frozen[:] = 0
    counters[RESETS] += 1
    refresh(kind, n, values, aux, counters)


@njit(cache=True, nogil=True)
def restart_kernel(kind, n, values, aux, frozen, counters, rng):
    shuffle_inplace(rng, values)
    frozen[:] = 0
    counters[RESTARTS] += 1
    counters[WINDOW] = 0
    refresh(kind, n, values, aux, counters)


@njit(cache=True, nogil=True)
def step_kernel(kind, n, values, aux, errs, frozen, counters, rng, buf, buf2,
                tenure, reset_limit, reset_count, policy, max_iterations, max_restarts,
                plateau=False):
    """One Adaptive Search iteration; returns RUNNING, SOLVED or EXHAUSTED."""
    if counters[COST] == 0:
        return SOLVED
    if counters[WINDOW] >= max_iterations:
        if counters[RESTARTS] >= max_restarts:
            return EXHAUSTED
        restart_kernel(kind, n, values, aux, frozen, counters, rng)
        if counters[COST] == 0:
            return SOLVED
    t = counters[ITER]
    search_errors_into(kind, n, values, aux, errs)
    var, ties = select_worst(errs, frozen, t, rng, buf)
    if var < 0:
        partial_reset_kernel(kind, n, values, aux, frozen, counters, rng, reset_count, buf, buf2)
        return SOLVED if counters[COST] == 0 else RUNNING
    counters[TIE_SUM] += ties
    j, delta, nbest = select_move(kind, n, values, aux, var, rng, buf)
    counters[ITER] = t + 1
    counters[WINDOW] += 1
    # a sideways swap competes with staying put, as one more tied candidate
    if delta < 0 or (plateau and delta == 0 and below(rng, nbest + 1) != 0):
        tmp = values[var]
        values[var] = values[j]
        values[j] = tmp
        fill_aux(kind, n, values, aux)
        if kind == ALL_INTERVAL:
            counters[COST] = cost_from_aux(kind, n, aux)
        else:
            counters[COST] += delta
    else:
        counters[LOCAL_MIN] += 1
        if policy == ESCAPE_TABU:
            frozen[var] = t + 1 + tenure
            marked = 0
            for v in range(frozen.shape[0]):
                if frozen[v] > t + 1:
                    marked += 1
            if marked >= reset_limit:
                partial_reset_kernel(kind, n, values, aux, frozen, counters, rng,
                                     reset_count, buf, buf2)
        else:
            partial_reset_kernel(kind, n, values, aux, frozen, counters, rng,
                                 reset_count, buf, buf2)
    return SOLVED if counters[COST] == 0 else RUNNING


@njit(cache=True, nogil=True)
def run_chunk(kind, n, values, aux, errs, frozen, counters, rng, buf, buf2,
              tenure, reset_limit, reset_count, policy, max_iterations, max_restarts, steps,
              plateau=False):
    """Run up to ``steps`` counted iterations or until solved/exhausted."""
    target = counters[ITER] + steps
    status = RUNNING
    while counters[ITER] < target:
        status = step_kernel(kind, n, values, aux, errs, frozen, counters, rng, buf, buf2,
                             tenure, reset_limit, reset_count, policy,
                             max_iterations, max_restarts, plateau)
        if status != RUNNING:
            break
    return status
