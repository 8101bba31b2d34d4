"""Numerical experiments: splitting statistics and engineered anti-crossings.

Two pipelines live here.

* ``splitting_sweep`` draws random instances at fixed alpha, picks a pair of
  isolated solutions and records the squared splitting coefficients
  (F^(m)(sigma1) - F^(m)(sigma2))^2 per N, for linear fits against N.
* ``build_anticrossing`` takes an instance with M - 1 clauses and two of its
  solutions, appends a clause that penalises the one favoured by the
  truncated series, and locates the crossing of the two truncated levels.
  Small instances are cross-checked against exact spectra.
"""

from __future__ import annotations

import dataclasses
import json
import math
import statistics
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateNeighborhood,
    GaplabError,
    InvalidParameter,
    PairTooClose,
    ResonantIntermediate,
)
from .estimates import adiabatic_time_estimate, lambda_cr_estimate, lambda_star
from .instance import (
    Instance,
    add_clause,
    cost,
    format_bits,
    generate_instance,
    reduce_instance,
    restrict,
)
from .perturbation import (
    SeriesCoefficients,
    series_coefficients,
    splitting_from,
)
from .solver import (
    SolutionPair,
    SolutionSet,
    enumerate_solutions,
    iter_distinguishing_clauses,
    select_pair,
)
from .tunneling import MAX_DP_DISTANCE, TunnelingAmplitude, tunneling_dp, tunneling_mc

__all__ = [
    "SweepConfig",
    "SweepResult",
    "FitResult",
    "CrossingReport",
    "CrossingFailure",
    "splitting_sweep",
    "linear_fit",
    "fit_sweep",
    "build_anticrossing",
    "locate_crossing",
    "adiabatic_time_estimate",
    "isolated_solutions",
    "engineer_crossings",
]

DISCARD_REASONS = ("unsat", "no-pair", "degenerate", "resonant", "budget")


# ---------------------------------------------------------------------------
# splitting statistics


@dataclass(frozen=True)
class SweepConfig:
    n_values: tuple
    alpha: float = 0.62
    samples_per_n: int = 500
    master_seed: int = 0
    max_order: int = 3
    min_pair_distance: int = 7
    node_budget: int = 1_000_000
    isolated_only: bool = True
    max_attempts_per_n: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        if not self.n_values or min(self.n_values) < 3:
            raise InvalidParameter("n_values must be nonempty with every N >= 3")
        if not 0 < self.alpha <= 1:
            raise InvalidParameter("alpha must be in (0, 1]")
        for name in ("samples_per_n", "max_order", "min_pair_distance", "node_budget",
                     "max_attempts_per_n"):
            if getattr(self, name) <= 0:
                raise InvalidParameter(f"{name} must be positive")

    def n_clauses(self, n_bits):
        return int(round(self.alpha * n_bits))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["n_values"] = list(self.n_values)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise InvalidParameter(f"unknown sweep config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SweepPoint:
    n_bits: int
    samples: list  # list of d_coeff tuples, in instance-index order
    indices: list
    attempts: int
    discards: Counter

    def squares(self, m):
        return [s[m - 1] ** 2 for s in self.samples]

    def mean_sq(self, m):
        sq = self.squares(m)
        return math.fsum(sq) / len(sq) if sq else math.nan

    def stderr_sq(self, m):
        sq = self.squares(m)
        if len(sq) < 2:
            return math.nan
        return statistics.stdev(sq) / math.sqrt(len(sq))

    def median_sq(self, m):
        sq = self.squares(m)
        return statistics.median(sq) if sq else math.nan

    @property
    def discarded(self):
        return sum(self.discards.values())


@dataclass
class SweepResult:
    config: SweepConfig
    points: list = field(default_factory=list)

    def point(self, n_bits):
        for p in self.points:
            if p.n_bits == n_bits:
                return p
        raise KeyError(n_bits)

    def fit(self, m):
        return fit_sweep(self, m)

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "points": [
                {
                    "N": p.n_bits,
                    "attempts": p.attempts,
                    "used": len(p.samples),
                    "discards": {r: p.discards.get(r, 0) for r in DISCARD_REASONS},
                    "mean_sq_split": [p.mean_sq(m) for m in range(1, self.config.max_order + 1)],
                    "stderr": [p.stderr_sq(m) for m in range(1, self.config.max_order + 1)],
                    "median_sq_split": [p.median_sq(m)
                                        for m in range(1, self.config.max_order + 1)],
                    "indices": p.indices,
                    "samples": [list(s) for s in p.samples],
                }
                for p in self.points
            ],
        }


def isolated_solutions(solutions, radius):
    """Solutions with no other solution within ``radius`` flips of the constrained bits.

    Two strings within Hamming distance ``radius`` agree exactly on at least
    one of ``radius + 1`` disjoint column blocks, so only solutions sharing a
    block pattern are ever compared.
    """
    sols = list(solutions.solutions)
    if len(sols) < 2:
        return sols
    cons = np.array([not f for f in solutions.free_mask])
    arr = np.array(sols, dtype=np.int8)[:, cons]
    keep = np.ones(len(sols), dtype=bool)
    width = arr.shape[1]
    edges = np.linspace(0, width, min(radius + 1, max(width, 1)) + 1).astype(int)
    for lo, hi in zip(edges, edges[1:]):
        packed = np.packbits(arr[:, lo:hi], axis=1)
        _, inverse, counts = np.unique(packed, axis=0, return_inverse=True,
                                       return_counts=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.concatenate(([0], np.cumsum(counts)))
        for g in np.flatnonzero(counts > 1):
            members = order[bounds[g]:bounds[g + 1]]
            rows = arr[members]
            for start in range(0, len(members), 512):
                block = rows[start:start + 512]
                d = (block[:, None, :] != rows[None, :, :]).sum(axis=2)
                d[np.arange(len(block)), np.arange(start, start + len(block))] = radius + 1
                close = d.min(axis=1) <= radius
                keep[members[start:start + len(block)][close]] = False
    return [s for s, k in zip(sols, keep) if k]


def _sweep_task(args):
    n_bits, index, cfg = args
    config = SweepConfig.from_dict(cfg)
    inst = generate_instance(n_bits, config.n_clauses(n_bits), config.master_seed,
                             n_bits, index)
    sols = enumerate_solutions(inst, config.node_budget)
    if not sols.complete:
        return index, "budget", None
    if len(sols) == 0:
        return index, "unsat", None
    radius = 2 * config.max_order
    pool = isolated_solutions(sols, radius) if config.isolated_only else sols.solutions
    pair = select_pair(pool, max(config.min_pair_distance, radius + 1))
    if pair is None:
        return index, "no-pair", None
    try:
        a = series_coefficients(inst, pair.sigma1, config.max_order, sols)
        b = series_coefficients(inst, pair.sigma2, config.max_order, sols)
    except DegenerateNeighborhood:
        return index, "degenerate", None
    except ResonantIntermediate:
        return index, "resonant", None
    split = splitting_from(a, b)
    return index, "ok", tuple(float(d) for d in split.d_coeffs)


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def splitting_sweep(config, jobs=1, chunk=512, progress=None):
    """Collect ``samples_per_n`` usable samples per N, taking instances in index order.

    The usable set is the first ``samples_per_n`` successes by instance index,
    so the result does not depend on ``jobs`` or ``chunk``.
    """
    cfg = config.to_dict()
    result = SweepResult(config)
    for n_bits in config.n_values:
        samples, indices = [], []
        discards = Counter()
        next_index = 0
        attempts = 0
        while len(samples) < config.samples_per_n and next_index < config.max_attempts_per_n:
            stop = min(next_index + chunk, config.max_attempts_per_n)
            batch = [(n_bits, i, cfg) for i in range(next_index, stop)]
            next_index = stop
            for index, status, payload in _map(_sweep_task, batch, jobs):
                if len(samples) >= config.samples_per_n:
                    break
                attempts += 1
                if status == "ok":
                    samples.append(payload)
                    indices.append(index)
                else:
                    discards[status] += 1
            if progress:
                progress(n_bits, len(samples), attempts)
        result.points.append(SweepPoint(n_bits, samples, indices, attempts, discards))
    return result


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    slope_stderr: float = math.nan
    intercept_stderr: float = math.nan

    def to_dict(self):
        return dataclasses.asdict(self)


def linear_fit(points):
    """Weighted least squares y = slope * x + intercept over (x, y, weight) triples."""
    pts = [(float(x), float(y), float(w)) for x, y, w in points]
    if len({x for x, _, _ in pts}) < 2:
        raise InvalidParameter("linear fit needs at least two distinct x values")
    if any(not w > 0 or not math.isfinite(w) for _, _, w in pts):
        raise InvalidParameter("weights must be positive and finite")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    w = np.array([p[2] for p in pts])
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    sxy = (w * (x - xm) * (y - ym)).sum()
    slope = sxy / sxx
    intercept = ym - slope * xm
    ss_res = (w * (y - slope * x - intercept) ** 2).sum()
    ss_tot = (w * (y - ym) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    slope_se = math.sqrt(1.0 / sxx)
    intercept_se = math.sqrt(1.0 / sw + xm * xm / sxx)
    return FitResult(float(slope), float(intercept), float(r2), len(pts),
                     slope_se, intercept_se)


def fit_sweep(result, m):
    """Fit of mean (F^(m)_{1,2})^2 against N, weighted by 1/stderr^2."""
    rows = [(p.n_bits, p.mean_sq(m), p.stderr_sq(m)) for p in result.points]
    rows = [r for r in rows if math.isfinite(r[2])]
    positive = [se for _, _, se in rows if se > 0]
    if not positive:
        # every point is exact (e.g. an identically zero statistic): unit weights
        return linear_fit([(n, y, 1.0) for n, y, _ in rows])
    floor = min(positive)
    return linear_fit([(n, y, 1.0 / max(se, floor) ** 2) for n, y, se in rows])


# ---------------------------------------------------------------------------
# anti-crossings


class CrossingFailure(GaplabError):
    """The add-one-clause construction could not produce a usable crossing."""

    kind = "crossing-failure"

    def __init__(self, message, reason):
        super().__init__(message)
        self.reason = reason


@dataclass
class CrossingReport:
    instance: Instance  # M - 1 clauses
    pair: SolutionPair  # sigma1 keeps cost 0, sigma2 is penalised
    added_clause: tuple
    penalty: int
    lambda_ref: float
    lambda_c: float
    series1: SeriesCoefficients
    series2: SeriesCoefficients
    curve: list  # (lam, E1, E2)
    tunneling: TunnelingAmplitude | None
    v12_at_lambda_c: float
    kappa: float
    gap_estimate: float
    skipped_clauses: int = 0
    exact: dict | None = None

    @property
    def final_instance(self):
        return add_clause(self.instance, self.added_clause)

    def difference(self, lam):
        return self.series1.energy(lam) - self.series2.energy(lam)

    def validate(self):
        final = self.final_instance
        if cost(final, self.pair.sigma1) != 0:
            raise InvalidParameter("sigma1 must solve the final instance")
        if cost(final, self.pair.sigma2) <= 0:
            raise InvalidParameter("sigma2 must be penalised by the added clause")
        if self.lambda_c is None:
            raise InvalidParameter("no crossing recorded")
        h = max(1e-6, 1e-4 * self.lambda_c)
        lo = self.difference(max(self.lambda_c - h, 0.0))
        hi = self.difference(self.lambda_c + h)
        if not (lo < 0 < hi or lo > 0 > hi):
            raise InvalidParameter("E1 - E2 does not change sign across lambda_c")
        return True

    def to_dict(self):
        return {
            "instance": self.instance.to_dict(),
            "pair": self.pair.to_dict(),
            "added_clause": list(self.added_clause),
            "penalty": self.penalty,
            "lambda_ref": self.lambda_ref,
            "lambda_c": self.lambda_c,
            "series1": self.series1.to_dict(),
            "series2": self.series2.to_dict(),
            "curve": [list(row) for row in self.curve],
            "tunneling": None if self.tunneling is None else self.tunneling.to_dict(),
            "v12_at_lambda_c": self.v12_at_lambda_c,
            "kappa": self.kappa,
            "gap_estimate": self.gap_estimate,
            "skipped_clauses": self.skipped_clauses,
            "exact": self.exact,
        }


def locate_crossing(diff, lo, hi, tol=1e-6, grid=256):
    """First sign change of ``diff`` on [lo, hi], refined by bisection to width <= tol.

    ``diff`` is a callable lam -> E1 - E2, or a ``CrossingReport``.
    """
    if isinstance(diff, CrossingReport):
        diff = diff.difference
    if not (0 <= lo < hi) or not tol > 0:
        raise InvalidParameter("need 0 <= lo < hi and tol > 0")
    xs = np.linspace(lo, hi, grid)
    prev_x, prev_y = float(xs[0]), diff(float(xs[0]))
    if prev_y == 0:
        return prev_x
    for x in xs[1:]:
        x = float(x)
        y = diff(x)
        if y == 0:
            return x
        if (y > 0) != (prev_y > 0):
            a, b, fa = prev_x, x, prev_y
            while b - a > tol:
                mid = 0.5 * (a + b)
                fm = diff(mid)
                if fm == 0:
                    return mid
                if (fm > 0) == (fa > 0):
                    a, fa = mid, fm
                else:
                    b = mid
            return 0.5 * (a + b)
        prev_x, prev_y = x, y
    return None


def default_lambda_ref(f2, n_bits):
    return min(lambda_star(f2, n_bits), 0.5 * lambda_cr_estimate(max(n_bits, 3)))


def _tunnel(instance, pair, mc_samples, seed):
    if pair.distance <= MAX_DP_DISTANCE:
        return tunneling_dp(instance, pair)
    return tunneling_mc(instance, pair, mc_samples, seed)


def build_anticrossing(instance_m_minus_1, pair, max_order=2, f2=0.18, lambda_ref=None,
                       lo=0.0, hi=1.5, tol=1e-6, solutions=None, kappa=2.0,
                       exact_check=None, exact_max_bits=12, mc_samples=100_000, seed=0,
                       max_candidates=2000, curve_points=61):
    """Append one clause that creates a level crossing between the pair's two solutions.

    Returns ``None`` when no clause can penalise the favoured solution while
    keeping the other at zero cost.  Candidate clauses are tried in
    lexicographic order; those that leave either level without a well-defined
    series (a degenerate neighbour) are skipped and counted.  Other failures
    raise ``CrossingFailure`` with a reason tag.
    """
    inst = instance_m_minus_1
    n = inst.n_bits
    radius = 2 * max_order
    if pair.distance <= radius:
        raise PairTooClose(f"pair distance {pair.distance} must exceed {radius}")
    try:
        sa = series_coefficients(inst, pair.sigma1, max_order, solutions)
        sb = series_coefficients(inst, pair.sigma2, max_order, solutions)
    except DegenerateNeighborhood as exc:
        raise CrossingFailure(str(exc), "degenerate") from exc
    lam_ref = default_lambda_ref(f2, n) if lambda_ref is None else float(lambda_ref)
    ea, eb = sa.energy(lam_ref), sb.energy(lam_ref)
    if ea == eb:
        raise CrossingFailure("both levels coincide at lambda_ref", "tie")
    # the favoured (lower) level gets the penalty; the other keeps cost 0
    if ea < eb:
        kept, favoured = pair.sigma2, pair.sigma1
    else:
        kept, favoured = pair.sigma1, pair.sigma2
    ordered = SolutionPair(kept, favoured)

    skipped = 0
    chosen = None
    for clause in iter_distinguishing_clauses(inst, ordered):
        if skipped >= max_candidates:
            raise CrossingFailure(f"{skipped} candidate clauses all degenerate", "degenerate")
        final = add_clause(inst, clause)
        try:
            s1 = series_coefficients(final, kept, max_order)
            s2 = series_coefficients(final, favoured, max_order)
        except DegenerateNeighborhood:
            skipped += 1
            continue
        chosen = clause, final, s1, s2
        break
    if chosen is None:
        if skipped:
            raise CrossingFailure(f"{skipped} candidate clauses all degenerate", "degenerate")
        return None
    clause, final, s1, s2 = chosen

    def diff(lam):
        return s1.energy(lam) - s2.energy(lam)

    lam_c = locate_crossing(diff, lo, hi, tol)
    if lam_c is None:
        raise CrossingFailure(f"truncated levels do not cross on [{lo}, {hi}]", "no-crossing")
    try:
        amp = _tunnel(final, ordered, mc_samples, seed)
    except ResonantIntermediate as exc:
        raise CrossingFailure(str(exc), "resonant") from exc
    v12 = amp.magnitude(lam_c)
    grid = np.linspace(lo, hi, curve_points)
    report = CrossingReport(
        instance=inst,
        pair=ordered,
        added_clause=tuple(clause),
        penalty=cost(final, favoured),
        lambda_ref=lam_ref,
        lambda_c=lam_c,
        series1=s1,
        series2=s2,
        curve=[(float(x), s1.energy(float(x)), s2.energy(float(x))) for x in grid],
        tunneling=amp,
        v12_at_lambda_c=v12,
        kappa=kappa,
        gap_estimate=kappa * v12,
        skipped_clauses=skipped,
    )
    reduced, _ = reduce_instance(final)
    if exact_check is None:
        exact_check = reduced.n_bits <= exact_max_bits
    if exact_check:
        report.exact = exact_crosscheck(report)
    return report


def exact_crosscheck(report, window=0.5, side=0.1, method="auto"):
    """Exact spectrum of the final instance (free bits removed) around the crossing.

    Scans the gap on [lambda_c (1 - window), lambda_c (1 + window)] and records
    ground-state overlaps with both solutions at lambda_min (1 -/+ side).
    """
    from .spectrum import cost_vector, ground_state_overlap, lowest_eigenpairs, min_gap_scan

    final = report.final_instance
    reduced, kept = reduce_instance(final)
    s1 = restrict(report.pair.sigma1, kept)
    s2 = restrict(report.pair.sigma2, kept)
    diag = cost_vector(reduced)
    lam_c = report.lambda_c
    lo = max(lam_c * (1 - window), 1e-9)
    hi = lam_c * (1 + window)

    def gap(lam):
        return lowest_eigenpairs(reduced, lam, 2, method=method, vectors=False,
                                 diag=diag).gap

    lam_min, delta_min = min_gap_scan(gap, lo, hi, tol=1e-7 * max(lam_c, 1.0))
    overlaps = {}
    for tag, lam in (("below", lam_min * (1 - side)), ("above", lam_min * (1 + side))):
        r = lowest_eigenpairs(reduced, lam, 2, method=method, diag=diag)
        overlaps[tag] = (ground_state_overlap(r, s1), ground_state_overlap(r, s2))
    below = overlaps["below"][0] - overlaps["below"][1]
    above = overlaps["above"][0] - overlaps["above"][1]
    v12_min = report.tunneling.magnitude(lam_min) if report.tunneling else math.nan
    return {
        "reduced_bits": reduced.n_bits,
        "lambda_min": lam_min,
        "delta_min": delta_min,
        "overlap_below": list(overlaps["below"]),
        "overlap_above": list(overlaps["above"]),
        "swap": bool(below > 0 > above),
        "location_error": abs(lam_min - lam_c) / lam_c,
        "kappa_measured": delta_min / report.v12_at_lambda_c
        if report.v12_at_lambda_c > 0 else math.nan,
        "kappa_at_lambda_min": delta_min / v12_min if v12_min > 0 else math.nan,
    }


def engineer_crossings(n_bits, count, seed=0, alpha=0.62, max_order=2, min_distance=None,
                       max_solutions=None, max_attempts=10_000, node_budget=1_000_000,
                       **kwargs):
    """Run the add-one-clause protocol on fresh random instances until ``count`` reports exist.

    Instances have round(alpha N) - 1 clauses.  ``max_solutions`` optionally
    restricts to instances with few solution orbits, which keeps competing low
    levels out of small exact spectra.  Returns ``(reports, failures)``.
    """
    radius = 2 * max_order
    min_distance = radius + 1 if min_distance is None else min_distance
    m = int(round(alpha * n_bits)) - 1
    reports = []
    failures = Counter()
    for index in range(max_attempts):
        if len(reports) >= count:
            break
        inst = generate_instance(n_bits, m, seed, n_bits, index)
        sols = enumerate_solutions(inst, node_budget)
        if not sols.complete:
            failures["budget"] += 1
            continue
        if len(sols) == 0:
            failures["unsat"] += 1
            continue
        if max_solutions is not None and len(sols) > max_solutions:
            failures["too-many-solutions"] += 1
            continue
        pool = isolated_solutions(sols, radius)
        pair = select_pair(pool, max(min_distance, radius + 1))
        if pair is None:
            failures["no-pair"] += 1
            continue
        try:
            report = build_anticrossing(inst, pair, max_order, solutions=sols,
                                        seed=seed, **kwargs)
        except CrossingFailure as exc:
            failures[exc.reason] += 1
            continue
        if report is None:
            failures["no-clause"] += 1
            continue
        reports.append(report)
    return reports, failures
