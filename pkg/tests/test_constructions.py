from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from r1lab.constructions import (
    Recipe,
    SpacerRule,
    dispersed_differences_event,
    dispersed_differences_probability,
    example52_recipe,
    lag_difference_counts,
    materialize,
    ornstein_sample,
    spacers_from_draws,
    staircase_spacers,
    zero_spacers,
)
from r1lab.dynseq import CutRule, classify_monotonicity, derive_stats, window_sums


class TestStaircase:
    def test_single_stage(self):
        assert staircase_spacers([4]).values == ((0, 1, 2, 3),)

    def test_degenerate_stage(self):
        assert staircase_spacers([1]).values == ((0,),)

    def test_multiple_stages(self):
        assert staircase_spacers([2, 3, 4]).values == (
            (0, 1), (0, 1, 2), (0, 1, 2, 3),
        )

    def test_stages_strictly_increasing_hence_square_monotone_bound(self):
        seq = staircase_spacers([5, 6, 7])
        for M in (1, 2, 3):
            for stage, report in zip(seq.values, classify_monotonicity(seq, M)):
                assert report.strictly_increasing
                assert report.square_stat <= Fraction(2 * M - 1, len(stage))


class TestOrnstein:
    def test_hand_example(self):
        assert spacers_from_draws((1, -1, 2, 0), 4) == (2, 7, 2, 5)
        assert sum(spacers_from_draws((1, -1, 2, 0), 4)) == 16

    def test_equal_draws_give_flat_spacers(self):
        assert spacers_from_draws((3, 3, 3, 3), 5) == (5, 5, 5, 5)

    def test_average_equals_range_so_window_height_shifts_by_it(self):
        sample = ornstein_sample((4, 5, 6), (3, 4, 5), seed=7)
        stats = derive_stats(sample.spacers)
        assert stats.averages == (3, 4, 5)

    def test_deterministic(self):
        a = ornstein_sample((2, 3, 4, 5), (2, 3, 4, 5), seed=99)
        b = ornstein_sample((2, 3, 4, 5), (2, 3, 4, 5), seed=99)
        assert a == b

    def test_stage_keyed_streams_stable_under_deepening(self):
        deep = ornstein_sample((2, 3, 4, 5), (2, 3, 4, 5), seed=99)
        shallow = ornstein_sample((2, 3, 4), (2, 3, 4), seed=99)
        assert deep.draws[:3] == shallow.draws

    def test_different_seeds_differ(self):
        a = ornstein_sample((6, 7, 8), (9, 9, 9), seed=1)
        b = ornstein_sample((6, 7, 8), (9, 9, 9), seed=2)
        assert a.draws != b.draws

    @given(st.integers(0, 10**6), st.lists(st.integers(1, 9), min_size=1, max_size=6))
    @settings(max_examples=40)
    def test_sample_invariants(self, seed, spreads):
        cuts = tuple(range(2, 2 + len(spreads)))
        spreads = tuple(sorted(spreads))
        sample = ornstein_sample(cuts, spreads, seed)
        rep = derive_stats(sample.spacers).representative
        for stage, spread, r in zip(sample.spacers.values, spreads, cuts):
            assert sum(stage) == r * spread
            assert all(0 <= v <= 2 * spread for v in stage)
        for rep_stage, spread in zip(rep.values, spreads):
            for k in range(1, len(rep_stage)):
                for value in window_sums(rep_stage, k):
                    assert abs(value) <= spread

    def test_requires_positive_spread(self):
        with pytest.raises(ValueError):
            ornstein_sample((2,), (0,), seed=3)

    def test_summability_warning_on_range_tracking_heights(self):
        # ranges equal to the heights keep the spacer mass ratio pinned at
        # 1/2 per stage, so the total added mass never settles
        recipe = Recipe(
            "heavy", CutRule.constant(2),
            SpacerRule.ornstein(CutRule.explicit([1, 4, 16]), seed=1), 3,
        )
        realized = materialize(recipe)
        assert realized.warnings

    def test_no_warning_on_light_spacers(self):
        recipe = Recipe(
            "light", CutRule.affine(1, 2),
            SpacerRule.ornstein(CutRule.affine(1, 2), seed=2026), 4,
        )
        assert materialize(recipe).warnings == ()


class TestExample52:
    def test_recipe_cuts(self):
        realized = materialize(example52_recipe(4))
        assert realized.cuts == (2, 2, 6, 14)

    def test_first_stages(self):
        realized = materialize(example52_recipe(3))
        # stage n puts a full column height over the first subcolumn only
        assert realized.spacers.values[0] == (1, 0)
        assert realized.spacers.values[1] == (3, 0)
        assert realized.spacers.values[2] == (9, 0, 0, 0, 0, 0)

    def test_only_first_subcolumn_gets_spacers(self):
        realized = materialize(example52_recipe(5))
        for stage in realized.spacers.values:
            assert all(v == 0 for v in stage[1:])


class TestLagDifferences:
    def test_lag_one(self):
        assert lag_difference_counts((1, -1, 2, 0), 1) == {-2: 2, 3: 1}

    def test_lag_two(self):
        assert lag_difference_counts((1, -1, 2, 0), 2) == {1: 2}

    def test_constant_word(self):
        assert lag_difference_counts((5,) * 7, 3) == {0: 4}

    def test_lag_out_of_range(self):
        with pytest.raises(ValueError):
            lag_difference_counts((1, 2, 3), 3)

    @given(st.lists(st.integers(-5, 5), min_size=2, max_size=30), st.data())
    def test_counts_total(self, word, data):
        lag = data.draw(st.integers(1, len(word) - 1))
        counts = lag_difference_counts(word, lag)
        assert sum(counts.values()) == len(word) - lag


class TestDispersalEvent:
    def test_hand_example_fails(self):
        # lag-1 differences of (1,-1,2,0) put the value -2 twice, above
        # (2/4) * 3 = 3/2
        assert not dispersed_differences_event(
            (1, -1, 2, 0), 4, Fraction(2), Fraction(1, 4)
        )

    def test_constant_word_threshold(self):
        word = (5,) * 6
        assert dispersed_differences_event(word, 3, Fraction(3), Fraction(1, 5))
        assert dispersed_differences_event(word, 3, Fraction(7, 2), Fraction(1, 5))
        assert not dispersed_differences_event(word, 3, Fraction(2), Fraction(1, 5))

    def test_enormous_alpha_always_passes(self):
        p = dispersed_differences_probability(
            6, 12, Fraction(6 * 12), Fraction(1, 5), trials=20, seed=4
        )
        assert p == 1

    def test_single_trial_reproducible(self):
        kwargs = dict(spread=10, m=50, alpha=Fraction(2), eps=Fraction(1, 5))
        a = dispersed_differences_probability(**kwargs, trials=1, seed=11)
        b = dispersed_differences_probability(**kwargs, trials=1, seed=11)
        assert a == b
        assert a in (0, 1)


class TestMaterialize:
    def test_zero_spacers(self):
        assert zero_spacers([2, 2]).values == ((0, 0), (0, 0))

    def test_explicit_pattern_repeats(self):
        recipe = Recipe("chacon", CutRule.constant(3), SpacerRule.from_pattern([0, 1, 0]), 4)
        realized = materialize(recipe)
        assert realized.spacers.values == ((0, 1, 0),) * 4

    def test_explicit_values_must_cover_depth(self):
        rule = SpacerRule.explicit([[0, 0]])
        with pytest.raises(ValueError):
            materialize(Recipe("short", CutRule.constant(2), rule, 2))

    def test_negative_spacers_rejected(self):
        rule = SpacerRule.explicit([[0, -1]])
        with pytest.raises(ValueError):
            materialize(Recipe("bad", CutRule.constant(2), rule, 1))

    def test_depth_override(self):
        recipe = Recipe("odo", CutRule.constant(2), SpacerRule.zero(), 6)
        assert materialize(recipe, depth=2).cuts == (2, 2)

    def test_ornstein_rule_requires_seed(self):
        with pytest.raises(ValueError):
            SpacerRule("ornstein", ranges=CutRule.constant(3))
