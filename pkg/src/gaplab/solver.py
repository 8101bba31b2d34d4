"""Solution enumeration for EC3 by depth-first branch-and-propagate.

Free bits (in no clause) are never branched on.  Each stored solution is the
representative of its free-bit orbit with all free bits at 0; ``free_mask``
marks the bits that may be toggled independently.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from .errors import InvalidParameter
from .instance import (
    Clause,
    as_assignment,
    clause_counts,
    format_bits,
    incidence,
    is_solution,
    parse_bits,
)


@dataclass(frozen=True)
class SolutionSet:
    solutions: tuple
    complete: bool
    nodes_explored: int
    free_mask: tuple

    def __len__(self):
        return len(self.solutions)

    @property
    def n_free(self):
        return sum(self.free_mask)

    def expand(self, limit=1 << 16):
        """All solutions including free-bit variants (bounded by ``limit``)."""
        free = [i for i, f in enumerate(self.free_mask) if f]
        if len(self.solutions) << len(free) > limit:
            raise InvalidParameter(
                f"expansion would produce {len(self.solutions) << len(free)} assignments"
            )
        out = []
        for s in self.solutions:
            for toggles in itertools.product((0, 1), repeat=len(free)):
                y = list(s)
                for pos, t in zip(free, toggles):
                    y[pos] = t
                out.append(tuple(y))
        return out

    def to_dict(self):
        return {
            "complete": self.complete,
            "solutions": [format_bits(s) for s in self.solutions],
            "free_mask": format_bits(self.free_mask),
            "nodes_explored": self.nodes_explored,
        }

    def dumps(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        return cls(
            tuple(parse_bits(s) for s in data["solutions"]),
            bool(data["complete"]),
            int(data.get("nodes_explored", 0)),
            parse_bits(data["free_mask"]),
        )


@dataclass(frozen=True)
class SolutionPair:
    sigma1: tuple
    sigma2: tuple

    @property
    def distance(self):
        return hamming_distance(self.sigma1, self.sigma2)

    def flipped_bits(self):
        return [i + 1 for i, (a, b) in enumerate(zip(self.sigma1, self.sigma2)) if a != b]

    def swapped(self):
        return SolutionPair(self.sigma2, self.sigma1)

    def to_dict(self):
        return {
            "sigma1": format_bits(self.sigma1),
            "sigma2": format_bits(self.sigma2),
            "distance": self.distance,
        }


class _Search:
    """One-shot DFS over the constrained bits of an instance."""

    def __init__(self, instance, node_budget, center=None, radius=None):
        if node_budget <= 0:
            raise InvalidParameter("node_budget must be positive")
        self.n = instance.n_bits
        self.clauses = instance.clauses
        self.inc = incidence(instance)
        counts = clause_counts(instance)
        self.order = sorted(
            (b for b in range(1, self.n + 1) if counts[b - 1] > 0),
            key=lambda b: (-counts[b - 1], b),
        )
        self.val = [-1] * (self.n + 1)
        self.ones = [0] * len(self.clauses)
        self.zeros = [0] * len(self.clauses)
        self.budget = node_budget
        self.nodes = 0
        self.exhausted = False
        self.center = center
        self.radius = radius
        self.dist = 0
        self.found = []

    def _assign(self, b, v, trail):
        """Assign and propagate; return False on conflict.  All changes go on ``trail``."""
        stack = [(b, v)]
        while stack:
            b, v = stack.pop()
            cur = self.val[b]
            if cur != -1:
                if cur != v:
                    return False
                continue
            self.val[b] = v
            trail.append(b)
            ok = True
            for ci in self.inc[b]:
                if v:
                    self.ones[ci] += 1
                else:
                    self.zeros[ci] += 1
                ones, zeros = self.ones[ci], self.zeros[ci]
                if ones >= 2 or zeros == 3:
                    ok = False
                elif ones == 1 and zeros < 2:
                    stack.extend((o, 0) for o in self.clauses[ci] if self.val[o] == -1)
                elif zeros == 2 and ones == 0:
                    stack.extend((o, 1) for o in self.clauses[ci] if self.val[o] == -1)
            if self.center is not None and self.center[b - 1] != v:
                self.dist += 1
                ok = ok and self.dist <= self.radius
            if not ok:
                return False
        return True

    def _undo(self, trail, mark):
        while len(trail) > mark:
            b = trail.pop()
            v = self.val[b]
            if self.center is not None and self.center[b - 1] != v:
                self.dist -= 1
            for ci in self.inc[b]:
                if v:
                    self.ones[ci] -= 1
                else:
                    self.zeros[ci] -= 1
            self.val[b] = -1

    def run(self):
        trail = []
        self._dfs(trail, 0)
        return self.found

    def _dfs(self, trail, pos):
        if self.nodes >= self.budget:
            self.exhausted = True
            return
        self.nodes += 1
        while pos < len(self.order) and self.val[self.order[pos]] != -1:
            pos += 1
        if pos == len(self.order):
            self.found.append(tuple(max(v, 0) for v in self.val[1:]))
            return
        b = self.order[pos]
        for v in (0, 1):
            mark = len(trail)
            if self._assign(b, v, trail):
                self._dfs(trail, pos + 1)
            self._undo(trail, mark)
            if self.exhausted:
                return


def enumerate_solutions(instance, node_budget=10**7):
    """List every solution (one per free-bit orbit) within ``node_budget`` search nodes."""
    search = _Search(instance, node_budget)
    found = search.run()
    counts = clause_counts(instance)
    free_mask = tuple(int(c == 0) for c in counts)
    return SolutionSet(tuple(sorted(found)), not search.exhausted, search.nodes, free_mask)


def solutions_within(instance, center, radius, node_budget=10**7):
    """Solutions whose constrained bits differ from ``center`` in at most ``radius`` places.

    Free bits of the returned assignments copy ``center``.  Returns
    ``(solutions, complete)``.
    """
    center = as_assignment(center, instance.n_bits)
    search = _Search(instance, node_budget, center=center, radius=radius)
    found = search.run()
    counts = clause_counts(instance)
    out = []
    for s in found:
        out.append(tuple(c if counts[i] == 0 else s[i] for i, c in enumerate(center)))
    return sorted(out), not search.exhausted


def hamming_distance(a, b):
    if len(a) != len(b):
        raise InvalidParameter(f"length mismatch {len(a)} vs {len(b)}")
    return sum(1 for u, v in zip(a, b) if u != v)


def _exactly_one(x, c):
    return x[c[0] - 1] + x[c[1] - 1] + x[c[2] - 1] == 1


def iter_distinguishing_clauses(instance, pair):
    """Lazily yield, in lexicographic order, clauses satisfied by sigma1 but not sigma2."""
    s1, s2 = pair.sigma1, pair.sigma2
    for x in (s1, s2):
        if len(x) != instance.n_bits or not is_solution(instance, x):
            raise InvalidParameter("distinguishing clauses need two solutions of the instance")
    for trip in itertools.combinations(range(1, instance.n_bits + 1), 3):
        if _exactly_one(s1, trip) and not _exactly_one(s2, trip):
            yield Clause(*trip)


def distinguishing_clauses(instance, pair):
    return list(iter_distinguishing_clauses(instance, pair))


def select_pair(solutions, min_distance):
    """Maximum-distance pair at distance >= ``min_distance``; ties go to the lexicographically first."""
    sols = sorted(solutions.solutions if isinstance(solutions, SolutionSet) else solutions)
    best = None
    best_d = max(min_distance, 1) - 1
    for a_idx, a in enumerate(sols):
        for b in sols[a_idx + 1:]:
            d = hamming_distance(a, b)
            if d > best_d:
                best, best_d = (a, b), d
    if best is None:
        return None
    return SolutionPair(*best)
