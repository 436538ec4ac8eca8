import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from twoway_qkd.chance import (
    GOLDEN,
    MASK64,
    BranchSpaceTooLarge,
    RandomChooser,
    derive_round_seed,
    enumerate_branches,
    mix64,
)
from twoway_qkd.qstate import Basis, Qubit, measure, measure_prob


class TestRoundSeed:
    def test_deterministic(self):
        assert derive_round_seed(7, 123) == derive_round_seed(7, 123)

    def test_no_collisions_over_a_million_indices(self):
        seeds = {derive_round_seed(0xC0FFEE, i) for i in range(1_000_000)}
        assert len(seeds) == 1_000_000

    def test_order_independent(self):
        idx = list(range(1000))
        forward = {i: derive_round_seed(5, i) for i in idx}
        random.Random(1).shuffle(idx)
        assert {i: derive_round_seed(5, i) for i in idx} == forward

    def test_frozen_values(self):
        # compatibility guarantee: these must never change
        assert derive_round_seed(0, 0) == mix64(mix64(GOLDEN))
        assert derive_round_seed(0, 0) == 0x48218226FF3CD4BF
        assert derive_round_seed(7, 1) == 0x0524257C04FCF117
        assert derive_round_seed(MASK64, 12345) == 0x36EC896D516FA8BE

    @given(st.integers(0, MASK64), st.integers(0, MASK64))
    def test_in_range(self, s, i):
        assert 0 <= derive_round_seed(s, i) <= MASK64


class TestRandomChooser:
    @given(st.floats(0, 1), st.integers(0, 2**32))
    def test_two_way_pick_matches_measure_threshold(self, theta_frac, seed):
        import math

        q = Qubit(math.cos(theta_frac * math.pi / 2), math.sin(theta_frac * math.pi / 2))
        p0 = measure_prob(q, Basis.Z, 0)
        rng = random.Random(seed)
        r = random.Random(seed).random()
        pick = RandomChooser(rng).pick((p0, 1 - p0))
        if 0 < p0 < 1:
            assert pick == measure(q, Basis.Z, r)[0]
        else:
            assert pick == (0 if p0 == 1 else 1)

    def test_forced_choice_consumes_no_draw(self):
        a = RandomChooser(3)
        a.pick((1.0, 0.0))
        a.pick((0.0, 0.0, 1.0))
        assert a.rng.random() == random.Random(3).random()

    def test_frequencies(self):
        c = RandomChooser(11)
        n = 100_000
        counts = [0, 0, 0, 0]
        for _ in range(n):
            counts[c.pick((0.25, 0.25, 0.25, 0.25))] += 1
        assert all(abs(k / n - 0.25) < 0.01 for k in counts)

    def test_empty_distribution(self):
        with pytest.raises(ValueError):
            RandomChooser(0).pick((0.0, 0.0))


def _expand(fn):
    return list(enumerate_branches(fn))


class TestScriptedChooser:
    def test_enumerates_every_leaf_once(self):
        def fn(ch):
            a = ch.pick((0.5, 0.5))
            if a == 0:
                return ("a0", ch.pick((0.25, 0.75)))
            return ("a1", ch.pick((1 / 3, 1 / 3, 1 / 3)))

        leaves = _expand(fn)
        assert sorted(v for v, _ in leaves) == [("a0", 0), ("a0", 1), ("a1", 0), ("a1", 1), ("a1", 2)]
        assert sum(p for _, p in leaves) == pytest.approx(1.0, abs=1e-12)
        assert dict(leaves)[("a0", 1)] == pytest.approx(0.375)

    def test_zero_weight_options_pruned(self):
        leaves = _expand(lambda ch: ch.pick((0.0, 1.0, 0.0)))
        assert leaves == [(1, 1.0)]

    def test_leaf_limit(self):
        def fn(ch):
            return [ch.pick((0.5, 0.5)) for _ in range(12)]

        with pytest.raises(BranchSpaceTooLarge) as info:
            list(enumerate_branches(fn, max_leaves=1000))
        assert info.value.count == 1001
