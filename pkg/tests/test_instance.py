import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaplab.errors import InvalidParameter
from gaplab.instance import (
    Instance,
    add_clause,
    clause_counts,
    cost,
    flip,
    format_bits,
    free_bits,
    from_mask,
    generate_instance,
    ising_coefficients,
    load_instance,
    make_clause,
    parse_bits,
    reduce_instance,
    restrict,
    save_instance,
    to_mask,
)
from oracles import brute_cost, clause_list
from strategies import instance_and_assignment, instances


class TestGenerate:
    def test_single_possible_clause(self):
        for seed in range(5):
            inst = generate_instance(3, 1, seed)
            assert inst.clauses == ((1, 2, 3),)

    def test_deterministic(self):
        assert generate_instance(100, 62, 7) == generate_instance(100, 62, 7)
        assert generate_instance(100, 62, 7) != generate_instance(100, 62, 8)

    def test_streams_are_independent(self):
        a = generate_instance(30, 18, 1, 30, 0)
        b = generate_instance(30, 18, 1, 30, 1)
        assert a != b
        assert a == generate_instance(30, 18, 1, 30, 0)

    def test_mean_field_matches_sampler_law(self):
        # each clause puts 3 distinct bits in; E[B_i] = 3 M / N
        means = [np.mean(clause_counts(generate_instance(100, 62, s))) for s in range(2000)]
        assert np.mean(means) == pytest.approx(1.86, abs=1e-12)  # exact: every clause adds 3

        # per-bit marginal: the count of a fixed bit averages to 1.86 over seeds
        first = [clause_counts(generate_instance(100, 62, s))[0] for s in range(10_000)]
        assert np.mean(first) == pytest.approx(1.86, abs=4 * np.std(first) / 100)

    def test_clauses_are_sorted_distinct_triples(self):
        inst = generate_instance(12, 40, 3)
        for c in inst.clauses:
            assert c.i < c.j < c.k <= 12

    @pytest.mark.parametrize("n,m", [(2, 1), (0, 0), (5, -1)])
    def test_invalid(self, n, m):
        with pytest.raises(InvalidParameter):
            generate_instance(n, m, 0)


class TestCost:
    def test_examples(self, tiny, two_clauses):
        assert cost(tiny, (1, 0, 0)) == 0
        assert cost(tiny, (1, 1, 1)) == 4
        assert cost(two_clauses, (0, 0, 0, 0)) == 2

    def test_length_mismatch(self, tiny):
        with pytest.raises(InvalidParameter):
            cost(tiny, (1, 0))

    @given(instance_and_assignment())
    def test_matches_oracle(self, case):
        inst, x = case
        assert cost(inst, x) == brute_cost(clause_list(inst), x)

    @given(instance_and_assignment())
    def test_ising_form_is_identity(self, case):
        inst, x = case
        assert ising_coefficients(inst).energy(x) == cost(inst, x)


class TestIsing:
    def test_single_clause(self, tiny):
        ic = ising_coefficients(tiny)
        assert ic.fields == (1, 1, 1)
        assert ic.constant == 1
        assert ic.coupling(1, 2) == ic.coupling(1, 3) == ic.coupling(2, 3) == 1

    def test_two_clauses(self, two_clauses):
        ic = ising_coefficients(two_clauses)
        assert ic.fields == (1, 2, 2, 1)
        assert ic.coupling(2, 3) == 2
        assert ic.coupling(3, 2) == 2
        for a, b in [(1, 2), (1, 3), (2, 4), (3, 4)]:
            assert ic.coupling(a, b) == 1
        assert ic.coupling(1, 4) == 0
        assert ic.coupling(2, 2) == 0

    @pytest.mark.parametrize("x,expected", [((0, 1, 0, 0), 0), ((1, 0, 0, 0), 1)])
    def test_identity_example(self, two_clauses, x, expected):
        # (0,1,0,0) puts exactly one 1 in both clauses; (1,0,0,0) leaves (2,3,4) empty
        assert cost(two_clauses, x) == expected
        assert ising_coefficients(two_clauses).energy(x) == expected


class TestAddClause:
    def test_grows_clause_count(self):
        inst = add_clause(Instance(3, ()), (1, 2, 3))
        assert inst.n_clauses == 1

    def test_cost_shift(self):
        base = Instance(3, ())
        after = add_clause(base, (3, 1, 2))
        assert cost(after, (1, 0, 0)) - cost(base, (1, 0, 0)) == 0
        assert cost(after, (1, 1, 1)) - cost(base, (1, 1, 1)) == 4
        assert after.clauses[-1] == (1, 2, 3)

    def test_duplicates_allowed(self, tiny):
        assert add_clause(tiny, (1, 2, 3)).n_clauses == 2

    @given(instances(), st.data())
    def test_cost_shift_is_clause_cost(self, inst, data):
        trip = data.draw(st.lists(st.integers(1, inst.n_bits), min_size=3, max_size=3,
                                  unique=True))
        x = tuple(data.draw(st.lists(st.integers(0, 1), min_size=inst.n_bits,
                                     max_size=inst.n_bits)))
        shift = cost(add_clause(inst, trip), x) - cost(inst, x)
        assert shift in (0, 1, 4)
        assert shift == (sum(x[t - 1] for t in trip) - 1) ** 2

    @pytest.mark.parametrize("bad", [(1, 1, 2), (0, 1, 2), (1, 2, 4), (1, 2)])
    def test_rejects_bad_clause(self, tiny, bad):
        with pytest.raises(InvalidParameter):
            add_clause(tiny, bad)


class TestFreeBits:
    def test_examples(self, tiny):
        assert free_bits(Instance(4, ((1, 2, 3),))) == {4}
        assert free_bits(tiny) == set()

    def test_recount_oracle(self):
        inst = generate_instance(50, 31, 1234)
        touched = {b for c in inst.clauses for b in c}
        assert free_bits(inst) == set(range(1, 51)) - touched

    def test_reduce_drops_free_bits(self):
        inst = Instance(6, ((2, 4, 6),))
        red, kept = reduce_instance(inst)
        assert kept == (2, 4, 6)
        assert red.n_bits == 3 and red.clauses == ((1, 2, 3),)
        x = (1, 0, 1, 1, 0, 0)
        assert cost(red, restrict(x, kept)) == cost(inst, x)


class TestSerialisation:
    def test_round_trip(self, tmp_path):
        inst = generate_instance(20, 12, 5)
        path = tmp_path / "i.json"
        save_instance(inst, path)
        assert load_instance(path) == inst
        assert json.loads(path.read_text()) == {"n": 20, "clauses": [list(c) for c in inst.clauses]}

    @pytest.mark.parametrize("text", ['{"n": 3}', '{"clauses": []}', "[1]", "nope",
                                      '{"n": 3, "clauses": [[1, 2, 5]]}',
                                      '{"n": "3", "clauses": []}'])
    def test_malformed(self, text):
        with pytest.raises(InvalidParameter):
            Instance.loads(text)

    def test_bits_helpers(self):
        assert parse_bits("0110") == (0, 1, 1, 0)
        assert format_bits((1, 0, 1)) == "101"
        assert to_mask((1, 0, 1)) == 5
        assert from_mask(5, 3) == (1, 0, 1)
        assert flip((0, 0, 0), [1, 3]) == (1, 0, 1)
        with pytest.raises(InvalidParameter):
            parse_bits("012")

    def test_make_clause_sorts(self):
        assert make_clause((3, 1, 2)) == (1, 2, 3)
