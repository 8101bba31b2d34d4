"""Small-lambda expansion of the energy levels of H(lambda) = H_P - lambda * sum_i X_i.

The level that tends to the classical assignment ``sigma`` as lambda -> 0 has

    E(lambda) = E_P(sigma) + sum_m lambda**(2m) F^(m)(sigma)

once the free bits are factored out (each contributes an exact, odd -lambda).
The coefficients are obtained by a linked-cluster expansion: every connected
set S of constrained bits with |S| <= m defines a 2^|S| subproblem (sigma with
any subset of S flipped, exact classical costs on the diagonal, unit hopping
between subcube neighbours), which is solved order by order with
Rayleigh-Schroedinger recursion.  Connected weights follow from Moebius
subtraction over subsets; a cluster first contributes at order |S|, so the
sum over |S| <= m is exact at order m.

Sign conventions: the F^(m) are ordinary RS coefficients (F^(1) of a solution
is -sum_i 1/B_i), and hopping carries -lambda.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .errors import DegenerateNeighborhood, InvalidParameter, PairTooClose
from .instance import (
    as_assignment,
    clause_counts,
    cost,
    flip,
    format_bits,
    incidence,
    neighbors,
)
from .solver import SolutionSet, hamming_distance, solutions_within

MAX_ORDER = 3
SIGN_CONVENTION = "rs-standard"
HOPPING = "-lambda"


@dataclass(frozen=True)
class SeriesCoefficients:
    base_energy: int
    f_coeffs: tuple
    center: tuple
    max_order: int
    reduced: bool
    n_free: int = 0
    exact: tuple = field(default=(), compare=False, repr=False)

    def energy(self, lam, include_free=False):
        """Truncated energy E_P + sum_m lam^(2m) F^(m); optionally with the -n_free*lam term."""
        e = float(self.base_energy)
        for m, f in enumerate(self.f_coeffs, start=1):
            e += lam ** (2 * m) * f
        if include_free:
            e -= self.n_free * lam
        return e

    def to_dict(self):
        return {
            "center": format_bits(self.center),
            "base_energy": self.base_energy,
            "f_coeffs": list(self.f_coeffs),
            "f_coeffs_exact": [str(f) for f in self.exact],
            "max_order": self.max_order,
            "reduced": self.reduced,
            "n_free": self.n_free,
            "sign_convention": SIGN_CONVENTION,
            "hopping": HOPPING,
        }


@dataclass(frozen=True)
class SplittingSeries:
    d_coeffs: tuple
    sigma1: tuple
    sigma2: tuple
    exact: tuple = field(default=(), compare=False, repr=False)

    def splitting(self, lam):
        return sum(lam ** (2 * m) * d for m, d in enumerate(self.d_coeffs, start=1))

    def to_dict(self):
        return {
            "sigma1": format_bits(self.sigma1),
            "sigma2": format_bits(self.sigma2),
            "d_coeffs": list(self.d_coeffs),
            "d_coeffs_exact": [str(d) for d in self.exact],
            "sign_convention": SIGN_CONVENTION,
            "hopping": HOPPING,
        }


# ---------------------------------------------------------------------------
# subcube Rayleigh-Schroedinger


def _rs_energies(pattern, n_orders, zero, one):
    """RS energy coefficients E^(2), E^(4), ... of state 0 of a subcube.

    ``pattern[a]`` is the diagonal energy of subcube vertex ``a`` relative to
    vertex 0; hopping is -1 between vertices differing in one bit.
    """
    dim = len(pattern)
    s = dim.bit_length() - 1
    denom = [zero] + [one / (-pattern[a]) for a in range(1, dim)]
    psi = [[one] + [zero] * (dim - 1)]
    energies = [zero]
    for k in range(1, 2 * n_orders + 1):
        prev = psi[k - 1]
        vpsi = [zero] * dim
        for a in range(dim):
            pa = prev[a]
            if pa:
                for b in range(s):
                    vpsi[a ^ (1 << b)] -= pa
        e_k = vpsi[0]
        energies.append(e_k)
        if k == 2 * n_orders:
            break
        new = [zero] * dim
        for a in range(1, dim):
            acc = vpsi[a]
            for j in range(1, k + 1):
                if energies[j]:
                    acc -= energies[j] * psi[k - j][a]
            new[a] = acc * denom[a]
        psi.append(new)
    return tuple(energies[2 * m] for m in range(1, n_orders + 1))


def _subpattern(pattern, positions):
    """Restrict a subcube pattern to the sub-subcube spanned by bit ``positions``."""
    out = []
    for u in range(1 << len(positions)):
        a = 0
        for t, pos in enumerate(positions):
            if (u >> t) & 1:
                a |= 1 << pos
        out.append(pattern[a])
    return tuple(out)


@lru_cache(maxsize=200_000)
def _cluster_weight_exact(pattern, n_orders):
    s = len(pattern).bit_length() - 1
    weight = list(_rs_energies(pattern, n_orders, Fraction(0), Fraction(1)))
    for r in range(1, s):
        for positions in itertools.combinations(range(s), r):
            sub = _cluster_weight_exact(_subpattern(pattern, positions), n_orders)
            for m in range(n_orders):
                weight[m] -= sub[m]
    return tuple(weight)


@lru_cache(maxsize=200_000)
def _cluster_weight_float(pattern, n_orders):
    s = len(pattern).bit_length() - 1
    weight = list(_rs_energies(pattern, n_orders, 0.0, 1.0))
    for r in range(1, s):
        for positions in itertools.combinations(range(s), r):
            sub = _cluster_weight_float(_subpattern(pattern, positions), n_orders)
            for m in range(n_orders):
                weight[m] -= sub[m]
    return tuple(weight)


# ---------------------------------------------------------------------------
# local energy bookkeeping


class _Local:
    """Classical energy changes around a fixed center assignment."""

    def __init__(self, instance, sigma):
        self.instance = instance
        self.sigma = sigma
        self.inc = incidence(instance)
        self.ones = [sum(sigma[b - 1] for b in c) for c in instance.clauses]

    def delta(self, bits):
        """E_P(sigma with ``bits`` flipped) - E_P(sigma)."""
        change = {}
        for b in bits:
            step = 1 - 2 * self.sigma[b - 1]
            for ci in self.inc[b]:
                change[ci] = change.get(ci, 0) + step
        d = 0
        for ci, ch in change.items():
            o = self.ones[ci]
            d += (o + ch - 1) ** 2 - (o - 1) ** 2
        return d

    def pattern(self, bits):
        bits = list(bits)
        return tuple(
            self.delta([b for t, b in enumerate(bits) if (mask >> t) & 1])
            for mask in range(1 << len(bits))
        )


def connected_subsets(adj, vertices, max_size):
    """Yield every connected vertex set of size <= ``max_size`` exactly once (sorted tuples)."""
    allowed = set(vertices)
    for v in sorted(allowed):
        yield from _extend((v,), {u for u in adj[v] if u > v and u in allowed},
                           v, adj, allowed, max_size, {v} | adj[v])


def _extend(sub, ext, root, adj, allowed, max_size, closed):
    yield tuple(sorted(sub))
    if len(sub) == max_size:
        return
    ext = set(ext)
    while ext:
        w = min(ext)
        ext.discard(w)
        new_ext = ext | {u for u in adj[w] if u > root and u in allowed and u not in closed}
        yield from _extend(sub + (w,), new_ext, root, adj, allowed, max_size, closed | adj[w])


# ---------------------------------------------------------------------------
# isolation


def _as_solution_list(solutions):
    if solutions is None:
        return None
    if isinstance(solutions, SolutionSet):
        if not solutions.complete:
            return None
        return solutions.solutions
    return solutions


def find_degenerate_neighbor(instance, sigma, radius, solutions=None):
    """An assignment with E_P equal to E_P(sigma) differing on 1..radius constrained bits, or None.

    For solutions the search runs over the (complete) solution list when one
    is supplied, otherwise a distance-bounded solver search.  For other
    assignments flip sets are decomposed into coupling-graph components, whose
    energy changes add.
    """
    sigma = as_assignment(sigma, instance.n_bits)
    counts = clause_counts(instance)
    constrained = [i for i in range(1, instance.n_bits + 1) if counts[i - 1] > 0]
    e0 = cost(instance, sigma)
    if radius <= 0 or not constrained:
        return None

    def far_enough(other):
        d = sum(1 for i in constrained if other[i - 1] != sigma[i - 1])
        return d == 0 or d > radius

    if e0 == 0:
        sols = _as_solution_list(solutions)
        if sols is None:
            sols, _ = solutions_within(instance, sigma, radius)
        for other in sols:
            if not far_enough(other):
                return tuple(other)
        return None

    local = _Local(instance, sigma)
    adj = neighbors(instance)
    sets = []
    for comp in connected_subsets(adj, constrained, radius):
        d = local.delta(comp)
        if d == 0:
            return flip(sigma, comp)
        if d <= e0:
            sets.append((comp, d))
    negatives = [s for s in sets if s[1] < 0]
    if not negatives:
        return None
    closed = {}
    for comp, _ in sets:
        cl = set(comp)
        for b in comp:
            cl |= adj[b]
        closed[comp] = cl
    sets.sort(key=lambda s: (len(s[0]), s[1], s[0]))

    # pairwise non-adjacent components whose energy changes add up to zero
    def search(start, chosen, blocked, size, total, has_neg):
        if chosen and total == 0 and has_neg:
            return chosen
        for idx in range(start, len(sets)):
            comp, d = sets[idx]
            if size + len(comp) > radius:
                continue
            if blocked & set(comp):
                continue
            found = search(idx + 1, chosen + [comp], blocked | closed[comp],
                           size + len(comp), total + d, has_neg or d < 0)
            if found:
                return found
        return None

    for comp, d in negatives:
        found = search(0, [comp], set(closed[comp]), len(comp), d, True)
        if found:
            return flip(sigma, [b for c in found for b in c])
    return None


def check_isolation(instance, sigma, radius, solutions=None):
    other = find_degenerate_neighbor(instance, sigma, radius, solutions)
    if other is not None:
        raise DegenerateNeighborhood(
            f"assignment {format_bits(other)} has the same classical energy as "
            f"{format_bits(sigma)} within distance {radius}",
            offending=other,
        )


# ---------------------------------------------------------------------------
# public operations


def _check_order(max_order, lo=1):
    if not isinstance(max_order, int) or not lo <= max_order <= MAX_ORDER:
        raise InvalidParameter(f"max_order must be in {lo}..{MAX_ORDER}, got {max_order}")


def _series_exact(instance, sigma, max_order, exact):
    counts = clause_counts(instance)
    constrained = [i for i in range(1, instance.n_bits + 1) if counts[i - 1] > 0]
    local = _Local(instance, sigma)
    adj = neighbors(instance)
    weight_fn = _cluster_weight_exact if exact else _cluster_weight_float
    zero = Fraction(0) if exact else 0.0
    totals = [zero] * max_order
    for comp in connected_subsets(adj, constrained, max_order):
        pattern = local.pattern(comp)
        if 0 in pattern[1:]:
            raise DegenerateNeighborhood(
                f"degenerate vertex inside cluster {comp} around {format_bits(sigma)}",
                offending=flip(sigma, [b for t, b in enumerate(comp)
                                       if (pattern.index(0, 1) >> t) & 1]),
            )
        w = weight_fn(pattern, max_order)
        for m in range(len(comp) - 1, max_order):
            totals[m] += w[m]
    return totals


def series_coefficients(instance, sigma, max_order=3, solutions=None, exact=True,
                        check=True):
    """Truncated energy expansion around ``sigma``.

    ``solutions`` (a complete ``SolutionSet`` or list) speeds up the isolation
    test for solution centers.  ``exact`` selects rational arithmetic.
    """
    _check_order(max_order)
    sigma = as_assignment(sigma, instance.n_bits)
    if check:
        check_isolation(instance, sigma, 2 * max_order, solutions)
    totals = _series_exact(instance, sigma, max_order, exact)
    n_free = sum(1 for c in clause_counts(instance) if c == 0)
    return SeriesCoefficients(
        base_energy=cost(instance, sigma),
        f_coeffs=tuple(float(t) for t in totals),
        center=sigma,
        max_order=max_order,
        reduced=n_free > 0,
        n_free=n_free,
        exact=tuple(totals) if exact else (),
    )


def cluster_weight(instance, sigma, bits, max_order=3, exact=True):
    """Connected weight w(S) of an arbitrary bit set, orders 1..max_order.

    Disconnected sets give exactly zero; used to check the linked-cluster property.
    """
    _check_order(max_order)
    sigma = as_assignment(sigma, instance.n_bits)
    local = _Local(instance, sigma)
    pattern = local.pattern(sorted(bits))
    if 0 in pattern[1:]:
        raise DegenerateNeighborhood(f"degenerate vertex inside {sorted(bits)}")
    fn = _cluster_weight_exact if exact else _cluster_weight_float
    return fn(pattern, max_order)


def splitting(instance, pair, max_order=3, solutions=None, exact=True):
    """Coefficient-wise difference F^(m)(sigma1) - F^(m)(sigma2)."""
    _check_order(max_order)
    s1 = as_assignment(pair.sigma1, instance.n_bits)
    s2 = as_assignment(pair.sigma2, instance.n_bits)
    if s1 == s2:
        zero = Fraction(0)
        return SplittingSeries((0.0,) * max_order, s1, s2, (zero,) * max_order)
    d = hamming_distance(s1, s2)
    if d <= 2 * max_order:
        raise PairTooClose(f"pair distance {d} must exceed {2 * max_order}")
    a = series_coefficients(instance, s1, max_order, solutions, exact)
    b = series_coefficients(instance, s2, max_order, solutions, exact)
    return splitting_from(a, b)


def splitting_from(a, b):
    if a.exact and b.exact:
        ex = tuple(x - y for x, y in zip(a.exact, b.exact))
        return SplittingSeries(tuple(float(x) for x in ex), a.center, b.center, ex)
    return SplittingSeries(
        tuple(x - y for x, y in zip(a.f_coeffs, b.f_coeffs)), a.center, b.center
    )


def dumps(obj):
    return json.dumps(obj.to_dict())
