import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from adaptsearch.problems import (
    Configuration,
    ProblemKind,
    ProblemSizeError,
    build_problem,
    delta_cost_swap,
    full_cost,
    is_solution,
    variable_errors,
)
from adaptsearch.rng import Xoshiro256
from adaptsearch.validators import check_solution, enumerate_costas

SIZES = {"magic-square": [3, 4, 6], "costas": [3, 5, 9], "all-interval": [2, 4, 11]}


def random_config(spec, rng):
    return rng.permutation(spec.base_domain)


def test_build_magic_square_3():
    spec = build_problem(ProblemKind.MAGIC_SQUARE, 3)
    assert spec.num_vars == 9
    assert spec.num_constraints == 8
    assert spec.magic_constant == 15
    assert sorted(spec.base_domain) == list(range(1, 10))
    # centre cell lies on its row, column and both diagonals
    assert spec.constraint_index[4] == (1, 4, 6, 7)


def test_build_costas_5():
    spec = build_problem("costas", 5)
    assert spec.num_vars == 5
    assert spec.num_constraints == 3
    assert all(spec.constraint_index[v] for v in range(5))


def test_build_all_interval_domain():
    spec = build_problem("all-interval", 6)
    assert list(spec.base_domain) == [0, 1, 2, 3, 4, 5]
    assert spec.num_constraints == 1


@pytest.mark.parametrize("kind,n", [("all-interval", 1), ("magic-square", 2),
                                    ("costas", 1), ("magic-square", 0)])
def test_build_rejects_small_sizes(kind, n):
    with pytest.raises(ProblemSizeError, match="needs n >="):
        build_problem(kind, n)


def test_unknown_problem():
    with pytest.raises(ValueError, match="unknown problem"):
        build_problem("sudoku", 9)


@pytest.mark.parametrize("kind", ["magic-square", "costas", "all-interval"])
def test_spec_invariants(kind):
    for n in SIZES[kind]:
        spec = build_problem(kind, n)
        assert spec.num_vars == len(spec.base_domain)
        if not (kind == "costas" and n < 3):
            assert all(len(ids) > 0 for ids in spec.constraint_index)


def test_lo_shu_is_solution():
    spec = build_problem("magic-square", 3)
    assert full_cost(spec, oracles.LO_SHU) == 0
    assert is_solution(spec, oracles.LO_SHU)
    assert not variable_errors(spec, oracles.LO_SHU).any()


def test_all_interval_identity():
    spec = build_problem("all-interval", 4)
    assert oracles.cost("all-interval", [0, 1, 2, 3], 4) == 2
    assert full_cost(spec, [0, 1, 2, 3]) == 2
    assert not is_solution(spec, [0, 1, 2, 3])


def test_costas_identity():
    spec = build_problem("costas", 4)
    assert oracles.cost("costas", [1, 2, 3, 4], 4) == 3
    assert full_cost(spec, [1, 2, 3, 4]) == 3
    errs = variable_errors(spec, [1, 2, 3, 4])
    assert errs.tolist() == oracles.var_errors("costas", [1, 2, 3, 4], 4)
    assert (errs > 0).all()


def test_magic_square_identity_projection():
    spec = build_problem("magic-square", 3)
    ident = list(range(1, 10))
    errs = variable_errors(spec, ident)
    assert errs[0] == 12
    assert errs[4] == 0
    assert errs.tolist() == oracles.var_errors("magic-square", ident, 3)


def test_all_interval_swap_example():
    spec = build_problem("all-interval", 4)
    assert delta_cost_swap(spec, [0, 1, 2, 3], 0, 3) == -1
    assert full_cost(spec, [3, 1, 2, 0]) == 1


def test_non_permutation_rejected():
    spec = build_problem("costas", 4)
    with pytest.raises(ValueError, match="permutation"):
        full_cost(spec, [1, 1, 2, 3])
    with pytest.raises(ValueError):
        full_cost(spec, [1, 2, 3])


def test_delta_index_errors():
    spec = build_problem("all-interval", 4)
    with pytest.raises(IndexError):
        delta_cost_swap(spec, [0, 1, 2, 3], 0, 4)
    with pytest.raises(ValueError):
        delta_cost_swap(spec, [0, 1, 2, 3], 2, 2)


def test_configuration_cache_matches_cost():
    spec = build_problem("costas", 7)
    cfg = Configuration.from_values(spec, [3, 1, 7, 2, 6, 5, 4])
    assert cfg.cost == oracles.cost("costas", cfg.values, 7)


@pytest.mark.parametrize("kind", ["magic-square", "costas", "all-interval"])
def test_cost_and_errors_match_oracle(kind):
    rng = Xoshiro256(11)
    for n in SIZES[kind]:
        spec = build_problem(kind, n)
        for _ in range(50):
            vals = random_config(spec, rng)
            assert full_cost(spec, vals) == oracles.cost(kind, vals, n)
            assert variable_errors(spec, vals).tolist() == oracles.var_errors(kind, vals, n)


@pytest.mark.parametrize("kind", ["magic-square", "costas", "all-interval"])
def test_delta_matches_full_recompute(kind):
    """10^4 random (configuration, swap) draws per kind, exact equality."""
    rng = Xoshiro256(2024)
    sizes = SIZES[kind]
    for t in range(10_000):
        n = sizes[t % len(sizes)]
        spec = build_problem(kind, n)
        vals = random_config(spec, rng)
        i = rng.integers(spec.num_vars)
        j = (i + 1 + rng.integers(spec.num_vars - 1)) % spec.num_vars
        expected = oracles.cost(kind, oracles.swapped(vals, i, j), n) - oracles.cost(kind, vals, n)
        assert delta_cost_swap(spec, vals, i, j) == expected


@pytest.mark.parametrize("kind", ["magic-square", "costas", "all-interval"])
def test_swap_involution(kind):
    rng = Xoshiro256(5)
    spec = build_problem(kind, SIZES[kind][-1])
    for _ in range(200):
        vals = random_config(spec, rng)
        i, j = 0, spec.num_vars - 1
        there = delta_cost_swap(spec, vals, i, j)
        back = delta_cost_swap(spec, oracles.swapped(vals, i, j), i, j)
        assert there + back == 0


def test_costas_order_5_enumeration():
    arrays = oracles.brute_force_costas(5)
    assert len(arrays) == 40
    assert sorted(arrays) == sorted(enumerate_costas(5))
    spec = build_problem("costas", 5)
    for p in arrays:
        assert is_solution(spec, p)
    others = [p for p in __import__("itertools").permutations(range(1, 6)) if p not in set(arrays)]
    assert not any(is_solution(spec, p) for p in others)


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(["magic-square", "costas", "all-interval"]),
       seed=st.integers(0, 2**64 - 1),
       swaps=st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 10**6)), max_size=30))
def test_swap_sequences_preserve_permutation_and_cost(kind, seed, swaps):
    n = SIZES[kind][1]
    spec = build_problem(kind, n)
    rng = Xoshiro256(seed)
    vals = list(random_config(spec, rng))
    cost = full_cost(spec, vals)
    for a, b in swaps:
        i, j = a % spec.num_vars, b % spec.num_vars
        if i == j:
            continue
        cost += delta_cost_swap(spec, vals, i, j)
        vals = oracles.swapped(vals, i, j)
        assert sorted(vals) == sorted(spec.base_domain.tolist())
        assert cost == full_cost(spec, vals)


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(["magic-square", "costas", "all-interval"]),
       seed=st.integers(0, 2**64 - 1))
def test_projection_overcounts_cost(kind, seed):
    n = SIZES[kind][1]
    spec = build_problem(kind, n)
    vals = random_config(spec, Xoshiro256(seed))
    assert variable_errors(spec, vals).sum() >= full_cost(spec, vals)


@pytest.mark.parametrize("kind,n,solution", [
    ("magic-square", 3, oracles.LO_SHU),
    ("costas", 5, [1, 3, 4, 2, 5]),
    ("all-interval", 6, [0, 5, 1, 4, 2, 3]),
])
def test_zero_cost_equivalence_on_solutions(kind, n, solution):
    spec = build_problem(kind, n)
    assert full_cost(spec, solution) == 0
    assert not variable_errors(spec, solution).any()
    assert check_solution(kind, n, solution)


@settings(max_examples=300, deadline=None)
@given(kind=st.sampled_from(["magic-square", "costas", "all-interval"]),
       seed=st.integers(0, 2**64 - 1))
def test_zero_cost_equivalence_random(kind, seed):
    n = {"magic-square": 3, "costas": 5, "all-interval": 5}[kind]
    spec = build_problem(kind, n)
    vals = random_config(spec, Xoshiro256(seed))
    zero = full_cost(spec, vals) == 0
    assert zero == (not variable_errors(spec, vals).any())
    assert zero == check_solution(kind, n, vals)
