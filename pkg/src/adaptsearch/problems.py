"""Permutation benchmark instances and their error functions.

Three benchmarks are supported: magic square (CSPLib prob019), Costas
array, and all-interval series (CSPLib prob007).  Each is modelled as a
permutation of a fixed value multiset, so every move is a position swap.

Cost definitions:

* magic square -- sum over the 2n+2 lines of ``|line sum - n(n²+1)/2|``;
* costas -- for each difference row ``d`` in 1..n-2, the number of
  entries minus the number of distinct differences;
* all-interval -- ``(n - 1)`` minus the number of distinct
  ``|s[i+1] - s[i]|``.

Variable errors for the difference-based kinds count the colliding
difference pairs a variable takes part in.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from adaptsearch import _kernels as K


class ProblemKind(enum.Enum):
    MAGIC_SQUARE = K.MAGIC_SQUARE
    COSTAS = K.COSTAS
    ALL_INTERVAL = K.ALL_INTERVAL

    @classmethod
    def parse(cls, name):
        """Accept enum members, ``"magic-square"``, ``"costas"``, ``"all_interval"``..."""
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "magic_square": cls.MAGIC_SQUARE,
            "magic": cls.MAGIC_SQUARE,
            "ms": cls.MAGIC_SQUARE,
            "costas": cls.COSTAS,
            "costas_array": cls.COSTAS,
            "all_interval": cls.ALL_INTERVAL,
            "ai": cls.ALL_INTERVAL,
        }
        if key not in aliases:
            raise ValueError(f"unknown problem {name!r}; expected one of "
                             "magic-square, costas, all-interval")
        return aliases[key]

    @property
    def label(self):
        return self.name.lower().replace("_", "-")


MIN_SIZE = {
    ProblemKind.MAGIC_SQUARE: 3,
    ProblemKind.COSTAS: 2,
    ProblemKind.ALL_INTERVAL: 2,
}


class ProblemSizeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """An immutable benchmark instance, safe to share between workers."""

    kind: ProblemKind
    n: int
    num_vars: int
    base_domain: np.ndarray
    constraint_index: tuple
    num_constraints: int
    _sorted_domain: np.ndarray = field(repr=False)

    @property
    def magic_constant(self):
        if self.kind is not ProblemKind.MAGIC_SQUARE:
            raise AttributeError("magic constant only exists for magic squares")
        return self.n * (self.n * self.n + 1) // 2

    @property
    def code(self):
        return self.kind.value

    def new_aux(self):
        return np.zeros(K.aux_shape(self.code, self.n), dtype=np.int64)

    def check_permutation(self, values):
        """Return ``values`` as an int64 array, raising if it is not a permutation."""
        arr = np.asarray(values)
        if arr.ndim != 1 or arr.shape[0] != self.num_vars:
            raise ValueError(f"expected {self.num_vars} values, got shape {arr.shape}")
        arr = arr.astype(np.int64, copy=False)
        if not np.array_equal(np.sort(arr), self._sorted_domain):
            raise ValueError("values are not a permutation of the base domain")
        return arr

    def __repr__(self):
        return f"ProblemSpec({self.kind.label}, n={self.n})"


def build_problem(kind, n) -> ProblemSpec:
    kind = ProblemKind.parse(kind)
    n = int(n)
    if n < MIN_SIZE[kind]:
        raise ProblemSizeError(f"{kind.label} needs n >= {MIN_SIZE[kind]}, got {n}")

    if kind is ProblemKind.MAGIC_SQUARE:
        num_vars = n * n
        domain = np.arange(1, n * n + 1, dtype=np.int64)
        index = []
        for v in range(num_vars):
            r, c = divmod(v, n)
            ids = [r, n + c]
            if r == c:
                ids.append(2 * n)
            if r + c == n - 1:
                ids.append(2 * n + 1)
            index.append(tuple(ids))
        num_constraints = 2 * n + 2
    elif kind is ProblemKind.COSTAS:
        num_vars = n
        domain = np.arange(1, n + 1, dtype=np.int64)
        # constraint id d-1 is difference row d; a variable sits in row d
        # whenever it has a partner at distance d
        index = [tuple(d - 1 for d in range(1, n - 1) if v + d < n or v - d >= 0)
                 for v in range(n)]
        num_constraints = n - 2
    else:
        num_vars = n
        domain = np.arange(0, n, dtype=np.int64)
        index = [(0,)] * n
        num_constraints = 1

    domain.setflags(write=False)
    sorted_domain = np.sort(domain)
    sorted_domain.setflags(write=False)
    return ProblemSpec(kind, n, num_vars, domain, tuple(index), num_constraints, sorted_domain)


@dataclass
class Configuration:
    """A permutation together with its cached cost."""

    values: np.ndarray
    cost: int

    @classmethod
    def from_values(cls, spec, values):
        arr = spec.check_permutation(values).copy()
        return cls(arr, full_cost(spec, arr))

    def copy(self):
        return Configuration(self.values.copy(), self.cost)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.cost == other.cost and np.array_equal(self.values, other.values)


def full_cost(spec, values) -> int:
    arr = spec.check_permutation(values)
    return int(K.full_cost_kernel(spec.code, spec.n, arr, spec.new_aux()))


def _as_values(spec, config):
    if isinstance(config, Configuration):
        return spec.check_permutation(config.values)
    return spec.check_permutation(config)


def variable_errors(spec, config) -> np.ndarray:
    values = _as_values(spec, config)
    aux = spec.new_aux()
    K.fill_aux(spec.code, spec.n, values, aux)
    out = np.zeros(spec.num_vars, dtype=np.int64)
    K.variable_errors_into(spec.code, spec.n, values, aux, out)
    return out


def delta_cost_swap(spec, config, i, j) -> int:
    """``full_cost(after swapping i, j) - full_cost(now)``."""
    values = _as_values(spec, config)
    for x in (i, j):
        if not 0 <= x < spec.num_vars:
            raise IndexError(f"variable index {x} out of range 0..{spec.num_vars - 1}")
    if i == j:
        raise ValueError("swap needs two distinct positions")
    aux = spec.new_aux()
    K.fill_aux(spec.code, spec.n, values, aux)
    return int(K.delta_swap(spec.code, spec.n, values, aux, int(i), int(j)))


def is_solution(spec, config) -> bool:
    return full_cost(spec, _as_values(spec, config)) == 0
