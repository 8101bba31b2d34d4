"""Leading-order tunneling amplitude between two assignments.

The lowest-order coupling between sigma1 and sigma2 at Hamming distance n is
a sum over the n! orders in which the differing bits can be flipped.  Each
path contributes the product, over its n - 1 strictly intermediate
assignments, of -1 / E_P(intermediate); the sum is the coefficient ``c`` with
V12 ~ c * lambda**n for hopping +lambda.  With the -lambda hopping used
throughout gaplab the matrix element is (-1)**n * c * lambda**n; only |V12|
enters gap estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, ResonantIntermediate, SizeError
from .instance import as_assignment, flip, format_bits, incidence
from .rng import make_rng

MAX_DP_DISTANCE = 24
RESONANCE_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class TunnelingAmplitude:
    order: int
    coefficient: float
    method: str
    stderr: float = 0.0
    sample_count: int = 0
    resonant_paths: int = 0
    resonance_warning: bool = False

    def matrix_element(self, lam):
        """V12 at ``lam`` under -lambda hopping."""
        return (-1) ** self.order * self.coefficient * lam ** self.order

    def magnitude(self, lam):
        return abs(self.coefficient) * lam ** self.order

    def to_dict(self):
        return {
            "order": self.order,
            "coefficient": self.coefficient,
            "method": self.method,
            "stderr": self.stderr,
            "sample_count": self.sample_count,
            "resonant_paths": self.resonant_paths,
            "resonance_warning": self.resonance_warning,
            "sign_convention": "(-1)^(n-1) from -1/E_P per intermediate",
            "hopping": "-lambda",
            "v12_sign_factor": (-1) ** self.order,
        }


def _prepare(instance, pair):
    s1 = as_assignment(pair.sigma1, instance.n_bits)
    s2 = as_assignment(pair.sigma2, instance.n_bits)
    bits = [i + 1 for i in range(instance.n_bits) if s1[i] != s2[i]]
    if not bits:
        raise InvalidParameter("pair members coincide; no tunneling path")
    return s1, bits


def subset_energies(instance, sigma, bits):
    """E_P(sigma with the bits of mask S flipped) for every mask over ``bits``.

    Vectorised over the 2^n masks; only clauses touching ``bits`` vary.
    """
    n = len(bits)
    inc = incidence(instance)
    pos = {b: t for t, b in enumerate(bits)}
    touched = sorted({ci for b in bits for ci in inc[b]})
    masks = np.arange(1 << n, dtype=np.int64)
    base = 0
    energy = np.zeros(1 << n, dtype=np.int64)
    touched_set = set(touched)
    for ci, c in enumerate(instance.clauses):
        ones0 = sigma[c.i - 1] + sigma[c.j - 1] + sigma[c.k - 1]
        if ci not in touched_set:
            base += (ones0 - 1) ** 2
            continue
        ones = np.full(1 << n, ones0, dtype=np.int64)
        for b in c:
            if b in pos:
                step = 1 - 2 * sigma[b - 1]
                ones += step * ((masks >> pos[b]) & 1)
        energy += (ones - 1) ** 2
    return energy + base


def _popcount(masks, n):
    pc = np.zeros_like(masks)
    for t in range(n):
        pc += (masks >> t) & 1
    return pc


def tunneling_dp(instance, pair):
    """Exact path sum by dynamic programming over the 2^n flip masks."""
    s1, bits = _prepare(instance, pair)
    n = len(bits)
    if n > MAX_DP_DISTANCE:
        raise SizeError(
            f"distance {n} exceeds {MAX_DP_DISTANCE}; use tunneling_mc for longer paths"
        )
    full = (1 << n) - 1
    energy = subset_energies(instance, s1, bits)
    inner = energy[1:full]
    if n > 1 and np.any(inner == 0):
        bad = int(np.flatnonzero(inner == 0)[0]) + 1
        offending = flip(s1, [b for t, b in enumerate(bits) if (bad >> t) & 1])
        raise ResonantIntermediate(
            f"intermediate {format_bits(offending)} has zero classical energy",
            offending=offending,
        )
    g = np.zeros(1 << n)
    g[0] = 1.0
    masks = np.arange(1 << n, dtype=np.int64)
    pc = _popcount(masks, n)
    layers = np.argsort(pc, kind="stable")
    bounds = np.searchsorted(pc[layers], np.arange(n + 2))
    for k in range(1, n):
        layer = layers[bounds[k]:bounds[k + 1]]
        acc = np.zeros(len(layer))
        for t in range(n):
            has = (layer >> t) & 1
            sel = has.astype(bool)
            acc[sel] += g[layer[sel] ^ (1 << t)]
        g[layer] = -acc / energy[layer]
    coefficient = float(sum(g[full ^ (1 << t)] for t in range(n)))
    return TunnelingAmplitude(order=n, coefficient=coefficient, method="exact-DP")


def tunneling_bruteforce(instance, pair):
    """Explicit sum over all n! flip orders (small n only; oracle for the DP)."""
    import itertools

    from .instance import cost

    s1, bits = _prepare(instance, pair)
    total = 0.0
    for order in itertools.permutations(bits):
        x = s1
        prod = 1.0
        for b in order[:-1]:
            x = flip(x, [b])
            e = cost(instance, x)
            if e == 0:
                raise ResonantIntermediate(f"intermediate {format_bits(x)} resonant")
            prod *= -1.0 / e
        total += prod
    return total


def tunneling_mc(instance, pair, samples, seed, batch=65536):
    """Monte Carlo path sum: n! times the mean product over uniform random flip orders.

    Paths through a zero-energy intermediate contribute zero and are counted;
    more than 1% of them sets ``resonance_warning``.
    """
    if samples < 1:
        raise InvalidParameter("samples must be >= 1")
    s1, bits = _prepare(instance, pair)
    n = len(bits)
    rng = make_rng(seed, n)
    inc = incidence(instance)
    touched = sorted({ci for b in bits for ci in inc[b]})
    col = {ci: t for t, ci in enumerate(touched)}
    ones0 = np.array(
        [sum(s1[b - 1] for b in instance.clauses[ci]) for ci in touched], dtype=np.int64
    )
    base = sum(
        (sum(s1[b - 1] for b in c) - 1) ** 2
        for ci, c in enumerate(instance.clauses)
        if ci not in col
    )
    flip_cols = [np.array([col[ci] for ci in inc[b]], dtype=np.int64) for b in bits]
    flip_step = [1 - 2 * s1[b - 1] for b in bits]
    log_nfact = math.lgamma(n + 1)

    total = 0.0
    total_sq = 0.0
    resonant = 0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        perms = np.argsort(rng.random((m, n)), axis=1)
        ones = np.tile(ones0, (m, 1))
        log_mag = np.zeros(m)
        dead = np.zeros(m, dtype=bool)
        rows = np.arange(m)
        for step in range(n - 1):
            which = perms[:, step]
            for t in range(n):
                sel = rows[which == t]
                if sel.size:
                    ones[np.ix_(sel, flip_cols[t])] += flip_step[t]
            e = ((ones - 1) ** 2).sum(axis=1) + base
            zero = e == 0
            dead |= zero
            log_mag -= np.log(np.where(zero, 1, e))
        # each intermediate contributes a factor -1
        sign = -1.0 if (n - 1) % 2 else 1.0
        values = np.where(dead, 0.0, sign * np.exp(log_mag + log_nfact))
        total += values.sum()
        total_sq += np.square(values).sum()
        resonant += int(dead.sum())
        done += m
    mean = total / samples
    if samples > 1:
        var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
        stderr = math.sqrt(var / samples)
    else:
        stderr = 0.0
    return TunnelingAmplitude(
        order=n,
        coefficient=float(mean),
        method="monte-carlo",
        stderr=float(stderr),
        sample_count=samples,
        resonant_paths=resonant,
        resonance_warning=resonant > RESONANCE_WARN_FRACTION * samples,
    )
