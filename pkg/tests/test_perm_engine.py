import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from twostep.errors import CapacityError, InvalidInputError
from twostep.perm_engine import (
    PermTrace,
    SeedSpec,
    count_arrangements,
    derive_stream,
    enumerate_label_assignments,
    permutation_pvalue,
    shuffled_rows,
)


class TestStreams:
    def test_deterministic(self):
        a = derive_stream(SeedSpec(42, 7)).random(100)
        b = derive_stream(SeedSpec(42, 7)).random(100)
        assert np.array_equal(a, b)

    def test_stream_separation(self):
        a = derive_stream(SeedSpec(42, 1)).random(100)
        b = derive_stream(SeedSpec(42, 2)).random(100)
        assert not np.array_equal(a, b)

    def test_master_separation(self):
        assert derive_stream(SeedSpec(1, 0)).random() != derive_stream(SeedSpec(2, 0)).random()

    def test_uniformity(self):
        draws = derive_stream(SeedSpec(2024, 99)).random(100_000)
        assert stats.kstest(draws, "uniform").pvalue > 0.01

    def test_child_is_pure(self):
        s = SeedSpec(5, 3)
        assert s.child(1, 2) == s.child(1, 2)
        assert s.child(1, 2) != s.child(2, 1)
        assert s.child(0).stream_id != s.stream_id

    def test_child_order_independent(self):
        s = SeedSpec(9)
        first = [s.child(i).stream_id for i in range(5)]
        again = [s.child(i).stream_id for i in reversed(range(5))][::-1]
        assert first == again

    @pytest.mark.parametrize("bad", [(-1, 0), (0, 2**64), (2**64, 0)])
    def test_range(self, bad):
        with pytest.raises(InvalidInputError):
            SeedSpec(*bad)

    def test_shuffle_uniform(self):
        rows = shuffled_rows(np.array([1, 2, 3]), 100_000, derive_stream(SeedSpec(11)))
        freq = Counter(map(tuple, rows.tolist()))
        assert len(freq) == 6
        for count in freq.values():
            assert abs(count / 100_000 - 1 / 6) < 0.01

    def test_shuffle_preserves_multiset(self):
        labels = np.array([0, 0, 1, 2, 2, 2])
        rows = shuffled_rows(labels, 50, derive_stream(SeedSpec(1)))
        assert all(sorted(r) == sorted(labels) for r in rows.tolist())


class TestPValue:
    def test_above_all(self):
        assert permutation_pvalue(PermTrace(10.0, np.zeros(999))) == pytest.approx(0.001)

    def test_all_ties(self):
        assert permutation_pvalue(PermTrace(1.0, np.ones(50))) == 1.0

    def test_hand_count(self):
        # 4 above, 1 tie, 4 below among 9 permuted values
        permuted = [1, 2, 3, 4, 5, 6, 7, 8, 9]
        assert permutation_pvalue(PermTrace(5.0, permuted)) == pytest.approx(0.6)

    def test_empty_trace(self):
        with pytest.raises(InvalidInputError):
            PermTrace(1.0, [])

    @given(st.floats(-10, 10), st.lists(st.floats(-10, 10), min_size=1, max_size=50))
    def test_never_zero(self, obs, perm):
        p = permutation_pvalue(PermTrace(obs, perm))
        assert 0 < p <= 1


class TestEnumeration:
    @pytest.mark.parametrize("labels, expected", [((0, 0, 1, 1), 6), ((0, 1, 2, 3), 24), ((0, 0, 0, 1), 4)])
    def test_counts(self, labels, expected):
        got = list(enumerate_label_assignments(labels))
        assert len(got) == expected == count_arrangements(labels)
        assert len(set(got)) == expected

    @given(st.lists(st.integers(0, 3), max_size=7))
    def test_matches_itertools(self, labels):
        got = list(enumerate_label_assignments(labels))
        assert sorted(got) == sorted(set(itertools.permutations(labels)))
        assert len(got) == len(set(got))

    def test_capacity(self):
        with pytest.raises(CapacityError) as err:
            enumerate_label_assignments([0] * 10 + [1] * 10, limit=1000)
        assert err.value.count == 184756
