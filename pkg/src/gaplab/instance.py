"""Exact Cover 3 instances, assignments, costs and Ising coefficients.

Bits are 1-based in clauses and in the JSON interchange format.  An assignment
is a tuple of 0/1 values; ``x[i - 1]`` is bit ``i``.  Where a compact form is
needed (hypercube vertices, DP masks) bit ``i`` maps to ``1 << (i - 1)``.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import InvalidParameter
from .rng import make_rng

Assignment = tuple


class Clause(NamedTuple):
    i: int
    j: int
    k: int


def make_clause(indices, n_bits=None):
    """Validate three bit indices and return them as a sorted ``Clause``."""
    idx = [int(t) for t in indices]
    if len(idx) != 3:
        raise InvalidParameter(f"clause needs exactly 3 indices, got {idx}")
    if len(set(idx)) != 3:
        raise InvalidParameter(f"repeated index within clause {idx}")
    if min(idx) < 1 or (n_bits is not None and max(idx) > n_bits):
        raise InvalidParameter(f"clause {idx} out of range 1..{n_bits}")
    return Clause(*sorted(idx))


@dataclass(frozen=True)
class Instance:
    n_bits: int
    clauses: tuple

    def __post_init__(self):
        if self.n_bits < 1:
            raise InvalidParameter("n_bits must be positive")
        object.__setattr__(
            self, "clauses", tuple(make_clause(c, self.n_bits) for c in self.clauses)
        )

    @property
    def n_clauses(self):
        return len(self.clauses)

    @property
    def alpha(self):
        return self.n_clauses / self.n_bits

    def to_dict(self):
        return {"n": self.n_bits, "clauses": [list(c) for c in self.clauses]}

    def dumps(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        try:
            n = data["n"]
            clauses = data["clauses"]
        except (KeyError, TypeError) as exc:
            raise InvalidParameter(f"malformed instance: {exc}") from None
        if not isinstance(n, int) or isinstance(n, bool):
            raise InvalidParameter("'n' must be an integer")
        return cls(n, tuple(make_clause(c, n) for c in clauses))

    @classmethod
    def loads(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameter(f"instance is not valid JSON: {exc}") from None
        return cls.from_dict(data)


def load_instance(path):
    with open(path, encoding="utf-8") as fh:
        return Instance.loads(fh.read())


def save_instance(instance, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance.dumps() + "\n")


@dataclass(frozen=True)
class IsingCoefficients:
    """Coefficients of cost(x) = constant - 1/2 sum B_i s_i + 1/4 sum_{i != j} J_ij s_i s_j."""

    constant: int
    fields: tuple
    couplings: dict  # (i, j) with i < j, 1-based -> count

    def coupling(self, i, j):
        if i == j:
            return 0
        return self.couplings.get((min(i, j), max(i, j)), 0)

    def energy(self, x):
        s = spins(x)
        e = self.constant - 0.5 * sum(b * si for b, si in zip(self.fields, s))
        # each unordered pair appears twice in the i != j sum
        e += 0.5 * sum(v * s[i - 1] * s[j - 1] for (i, j), v in self.couplings.items())
        return e


def generate_instance(n_bits, n_clauses, seed, *stream):
    """Draw ``n_clauses`` clauses independently, each a uniform 3-subset of bits.

    Extra positional ``stream`` integers select an independent sub-stream of
    ``seed`` (used by sweeps to key instances by index).
    """
    if n_bits < 3:
        raise InvalidParameter(f"n_bits must be >= 3, got {n_bits}")
    if n_clauses < 0:
        raise InvalidParameter(f"n_clauses must be >= 0, got {n_clauses}")
    rng = make_rng(seed, *stream)
    clauses = []
    for _ in range(n_clauses):
        trip = rng.choice(n_bits, size=3, replace=False) + 1
        clauses.append(Clause(*sorted(int(t) for t in trip)))
    return Instance(n_bits, tuple(clauses))


def as_assignment(x, n_bits=None):
    bits = tuple(int(b) for b in x)
    if any(b not in (0, 1) for b in bits):
        raise InvalidParameter("assignment entries must be 0 or 1")
    if n_bits is not None and len(bits) != n_bits:
        raise InvalidParameter(f"assignment length {len(bits)} != n_bits {n_bits}")
    return bits


def parse_bits(text):
    """'0110' -> (0, 1, 1, 0)."""
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise InvalidParameter(f"not a bit string: {text!r}")
    return tuple(int(c) for c in text)


def format_bits(x):
    return "".join(str(int(b)) for b in x)


def spins(x):
    return tuple(1 - 2 * b for b in x)


def to_mask(x):
    m = 0
    for pos, b in enumerate(x):
        if b:
            m |= 1 << pos
    return m


def from_mask(mask, n_bits):
    return tuple((mask >> pos) & 1 for pos in range(n_bits))


def clause_cost(clause, x):
    ones = x[clause[0] - 1] + x[clause[1] - 1] + x[clause[2] - 1]
    return (ones - 1) ** 2


def cost(instance, x):
    if len(x) != instance.n_bits:
        raise InvalidParameter(
            f"assignment length {len(x)} != n_bits {instance.n_bits}"
        )
    return sum(clause_cost(c, x) for c in instance.clauses)


def is_solution(instance, x):
    return cost(instance, x) == 0


def ising_coefficients(instance):
    fields = [0] * instance.n_bits
    couplings = Counter()
    for c in instance.clauses:
        for b in c:
            fields[b - 1] += 1
        couplings[(c.i, c.j)] += 1
        couplings[(c.i, c.k)] += 1
        couplings[(c.j, c.k)] += 1
    return IsingCoefficients(instance.n_clauses, tuple(fields), dict(couplings))


def clause_counts(instance):
    """Number of clauses containing each bit (the field B_i), as a list."""
    counts = [0] * instance.n_bits
    for c in instance.clauses:
        for b in c:
            counts[b - 1] += 1
    return counts


def add_clause(instance, clause):
    clause = make_clause(clause, instance.n_bits)
    return Instance(instance.n_bits, instance.clauses + (clause,))


def free_bits(instance):
    """1-based indices of bits that appear in no clause."""
    counts = clause_counts(instance)
    return frozenset(i + 1 for i, b in enumerate(counts) if b == 0)


def reduce_instance(instance):
    """Drop free bits and relabel the rest consecutively.

    Returns ``(reduced, kept)`` where ``kept[r]`` is the original 1-based index
    of reduced bit ``r + 1``.
    """
    free = free_bits(instance)
    kept = [i for i in range(1, instance.n_bits + 1) if i not in free]
    relabel = {old: new for new, old in enumerate(kept, start=1)}
    clauses = tuple(Clause(*(relabel[b] for b in c)) for c in instance.clauses)
    return Instance(max(len(kept), 1), clauses), tuple(kept)


def restrict(x, kept):
    return tuple(x[i - 1] for i in kept)


def incidence(instance):
    """For each 1-based bit, the list of clause positions containing it (index 0 unused)."""
    inc = [[] for _ in range(instance.n_bits + 1)]
    for ci, c in enumerate(instance.clauses):
        for b in c:
            inc[b].append(ci)
    return inc


def neighbors(instance):
    """Adjacency of the coupling graph {i ~ j iff J_ij > 0}, 1-based, as sets."""
    adj = [set() for _ in range(instance.n_bits + 1)]
    for c in instance.clauses:
        adj[c.i].update((c.j, c.k))
        adj[c.j].update((c.i, c.k))
        adj[c.k].update((c.i, c.j))
    return adj


def flip(x, bits: Iterable[int]):
    y = list(x)
    for b in bits:
        y[b - 1] ^= 1
    return tuple(y)


def hamming_mask_bits(a: Sequence[int], b: Sequence[int]):
    return [i + 1 for i, (u, v) in enumerate(zip(a, b)) if u != v]
