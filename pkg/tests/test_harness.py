import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaplab.errors import InvalidParameter, PairTooClose
from gaplab.harness import (
    CrossingFailure,
    SweepConfig,
    build_anticrossing,
    default_lambda_ref,
    engineer_crossings,
    fit_sweep,
    isolated_solutions,
    linear_fit,
    locate_crossing,
    splitting_sweep,
)
from gaplab.instance import Instance, cost, generate_instance
from gaplab.solver import SolutionPair, enumerate_solutions
from oracles import weighted_fit

TINY_SWEEP = SweepConfig(n_values=(16, 20), samples_per_n=12, master_seed=3, max_order=2,
                         min_pair_distance=5)


class TestLinearFit:
    def test_exact_line(self):
        fit = linear_fit([(1, 2, 1), (2, 4, 1), (3, 6, 1)])
        assert fit.slope == pytest.approx(2.0)
        assert fit.intercept == pytest.approx(0.0, abs=1e-12)
        assert fit.r_squared == 1.0

    def test_constant(self):
        fit = linear_fit([(1, 5, 1), (2, 5, 1), (4, 5, 2)])
        assert fit.slope == 0.0 and fit.intercept == 5.0

    @given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 10)),
                    min_size=3, max_size=12))
    def test_matches_polyfit(self, pts):
        xs = [p[0] for p in pts]
        if max(xs) - min(xs) < 1e-3:
            return
        fit = linear_fit(pts)
        slope, intercept = weighted_fit(xs, [p[1] for p in pts], [p[2] for p in pts])
        assert fit.slope == pytest.approx(slope, rel=1e-6, abs=1e-6)
        assert fit.intercept == pytest.approx(intercept, rel=1e-6, abs=1e-5)
        assert 0.0 <= fit.r_squared <= 1.0

    def test_recovers_synthetic_slope(self):
        rng = np.random.default_rng(0)
        sigma = 0.05
        pts = [(n, 0.03 * n + 0.1 + rng.normal(0, sigma), 1 / sigma ** 2)
               for n in range(20, 61, 2)]
        fit = linear_fit(pts)
        assert abs(fit.slope - 0.03) <= 2 * fit.slope_stderr

    def test_errors(self):
        with pytest.raises(InvalidParameter):
            linear_fit([(1, 2, 1), (1, 3, 1)])
        with pytest.raises(InvalidParameter):
            linear_fit([(1, 2, 1), (2, 3, 0)])


class TestSweepConfig:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(TINY_SWEEP.to_dict()))
        assert SweepConfig.load(path) == TINY_SWEEP
        assert TINY_SWEEP.n_clauses(20) == round(0.62 * 20)

    def test_rejects_unknown_keys(self):
        with pytest.raises(InvalidParameter):
            SweepConfig.from_dict({"n_values": [10], "bogus": 1})


@pytest.fixture(scope="module")
def tiny_sweep():
    return splitting_sweep(TINY_SWEEP)


class TestSweep:
    def test_collects_requested_samples(self, tiny_sweep):
        for p in tiny_sweep.points:
            assert len(p.samples) == TINY_SWEEP.samples_per_n
            assert p.indices == sorted(p.indices)
            assert p.attempts == len(p.samples) + p.discarded

    def test_first_order_vanishes(self, tiny_sweep):
        for p in tiny_sweep.points:
            assert p.mean_sq(1) == 0.0
        assert fit_sweep(tiny_sweep, 1).slope == 0.0

    def test_independent_of_chunking_and_jobs(self, tiny_sweep):
        again = splitting_sweep(TINY_SWEEP, jobs=2, chunk=7)
        assert again.to_dict() == tiny_sweep.to_dict()

    def test_fit_reproducible(self, tiny_sweep):
        a = fit_sweep(tiny_sweep, 2)
        b = fit_sweep(splitting_sweep(TINY_SWEEP), 2)
        assert a == b
        assert math.isfinite(a.slope)

    def test_statistics(self, tiny_sweep):
        p = tiny_sweep.point(16)
        sq = p.squares(2)
        assert p.mean_sq(2) == pytest.approx(np.mean(sq))
        assert p.stderr_sq(2) == pytest.approx(np.std(sq, ddof=1) / math.sqrt(len(sq)))
        assert p.median_sq(2) == pytest.approx(np.median(sq))

    def test_seeds_differ(self, tiny_sweep):
        other = splitting_sweep(SweepConfig(**{**TINY_SWEEP.to_dict(), "master_seed": 4,
                                                "n_values": (16,)}))
        assert other.point(16).samples != tiny_sweep.point(16).samples


class TestIsolation:
    def test_matches_pairwise_distances(self):
        for idx in range(30):
            sols = enumerate_solutions(generate_instance(24, 15, 1, idx))
            if len(sols) < 2 or len(sols) > 2000:
                continue
            cons = np.array([not f for f in sols.free_mask])
            arr = np.array(sols.solutions)[:, cons]
            d = (arr[:, None] != arr[None]).sum(axis=2)
            np.fill_diagonal(d, 99)
            for r in (2, 4):
                expect = [s for s, k in zip(sols.solutions, d.min(axis=1) > r) if k]
                assert isolated_solutions(sols, r) == expect

    def test_exactly_one_clause(self):
        sols = enumerate_solutions(Instance(3, ((1, 2, 3),)))
        assert isolated_solutions(sols, 1) == list(sols.solutions)
        assert isolated_solutions(sols, 2) == []


class TestLocateCrossing:
    def test_quartic_root(self):
        lam = locate_crossing(lambda x: 1 - 4 * x ** 4, 0.0, 1.5, tol=1e-9)
        assert lam == pytest.approx(4 ** -0.25, abs=1e-9)

    def test_none_without_sign_change(self):
        assert locate_crossing(lambda x: 1 + x * x, 0.0, 1.5) is None

    def test_bad_bracket(self):
        with pytest.raises(InvalidParameter):
            locate_crossing(lambda x: x, 1.0, 0.0)

    def test_default_reference_coupling(self):
        assert default_lambda_ref(0.18, 200) == pytest.approx(0.5 / math.log(200))
        assert default_lambda_ref(1e4, 10 ** 8) == pytest.approx(math.sqrt(2) * 0.1 * 0.1)


@pytest.fixture(scope="module")
def engineered():
    reports, failures = engineer_crossings(14, 3, seed=1, exact_check=False)
    assert len(reports) == 3, failures
    return reports


class TestAntiCrossing:
    def test_cost_conditions(self, engineered):
        for r in engineered:
            final = r.final_instance
            assert final.n_clauses == r.instance.n_clauses + 1
            assert cost(final, r.pair.sigma1) == 0
            assert r.penalty == cost(final, r.pair.sigma2) in (1, 4)
            assert cost(r.instance, r.pair.sigma2) == 0
            assert r.validate()

    def test_level_ordering_flips(self, engineered):
        # penalised level starts above at lam = 0, truncated levels cross at lambda_c
        for r in engineered:
            assert r.series1.energy(0.0) < r.series2.energy(0.0)
            assert r.difference(0.0) < 0
            assert r.difference(min(1.5, r.lambda_c * 1.05)) > 0 or r.lambda_c > 1.4
            assert locate_crossing(r, 0.0, 1.5) == pytest.approx(r.lambda_c, abs=1e-6)

    def test_gap_estimate(self, engineered):
        for r in engineered:
            amp = r.tunneling
            assert amp.order == r.pair.distance
            assert r.v12_at_lambda_c == pytest.approx(abs(amp.coefficient) * r.lambda_c ** amp.order)
            assert r.gap_estimate == pytest.approx(2.0 * r.v12_at_lambda_c)

    def test_favoured_member_penalised(self, engineered):
        # without the clause, the penalised solution had the lower truncated energy
        from gaplab.perturbation import series_coefficients
        for r in engineered:
            a = series_coefficients(r.instance, r.pair.sigma1, 2)
            b = series_coefficients(r.instance, r.pair.sigma2, 2)
            assert b.energy(r.lambda_ref) <= a.energy(r.lambda_ref)

    def test_serialisable(self, engineered):
        d = engineered[0].to_dict()
        for key in ("instance", "pair", "added_clause", "penalty", "lambda_c", "series1",
                    "series2", "tunneling", "v12_at_lambda_c", "kappa", "gap_estimate"):
            assert key in d

    def test_exact_crosscheck_fields(self):
        reports, _ = engineer_crossings(11, 1, seed=0, max_attempts=3000)
        if not reports:
            pytest.skip("no N=11 crossing within the attempt budget")
        ex = reports[0].exact
        assert ex is not None and ex["reduced_bits"] <= 12
        assert ex["delta_min"] > 0
        assert 0 <= ex["location_error"] < 0.5
        assert all(0 <= o <= 1 for o in ex["overlap_below"] + ex["overlap_above"])

    def test_no_clause_returns_none(self, engineered, monkeypatch):
        import gaplab.harness as harness
        r = engineered[0]
        monkeypatch.setattr(harness, "iter_distinguishing_clauses", lambda inst, pair: iter(()))
        assert build_anticrossing(r.instance, r.pair, max_order=2) is None

    def test_pair_too_close(self):
        inst = Instance(6, ((1, 2, 3), (4, 5, 6)))
        pair = SolutionPair((1, 0, 0, 1, 0, 0), (0, 1, 0, 0, 1, 0))
        with pytest.raises(PairTooClose):
            build_anticrossing(inst, pair, max_order=2)
