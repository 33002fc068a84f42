"""Test cases for LI, PAOI, k-ROI, FROI, EHS and PAAEMD abstractions."""

from fractions import Fraction

import numpy as np
import pytest

from src.soog.abstraction import (
    AbstractionMap,
    build_ehs,
    build_froi,
    build_kroi,
    build_li,
    build_map,
    build_paaemd,
    build_paoi,
    check_refinement,
    child_labels,
    class_sizes,
    ehs_equity,
    expected_equity_table,
    extended_signals,
    kroi_feature,
    map_from_labels,
    paof,
    phase_counts,
    reference_counts,
    transition_histogram,
    winrate_outcome_feature,
    winrate_table,
)
from src.soog.core import ObservationInfoset
from src.soog.errors import DependencyError, DomainError, ParameterError, PhaseError
from src.soog.games import HULH_CARDS, LEDUC, NUMERAL211, get_game
from src.soog.indexing import canonical_index, get_index


def _leduc(hole, board=None):
    deck = LEDUC.deck
    return ObservationInfoset(
        owner=1,
        own_cards=(deck.parse(hole),),
        board=((deck.parse(board),),) if board else (),
    )


def _bucket(amap, obs):
    return int(amap.buckets[obs.phase - 1][canonical_index(obs, LEDUC).index])


class TestAbstractionMap:
    """Test map validation and equality."""

    def test_bucket_ids_must_be_dense(self):
        """Test that gaps in bucket ids are rejected."""
        with pytest.raises(DomainError):
            AbstractionMap("leduc", "x", (np.array([0, 2, 2]),))
        with pytest.raises(DomainError):
            AbstractionMap("leduc", "x", (np.array([], dtype=np.int64),))

    def test_equality_ignores_label(self):
        """Test that two maps with the same partition are equal."""
        a = AbstractionMap("leduc", "paoi", (np.array([0, 1, 1]),))
        b = AbstractionMap("leduc", "froi", (np.array([0, 1, 1]),))
        assert a == b
        assert a != AbstractionMap("leduc", "paoi", (np.array([0, 0, 1]),))
        assert a.counts == (2,)


class TestLeducOutcomeFeatures:
    """Test worked Leduc features."""

    def test_winrate_features(self):
        """Test loss, tie and win counts against the four live opponent cards."""
        assert winrate_outcome_feature(_leduc("Jh", "Js"), LEDUC).counts == (0, 0, 4)
        feature = winrate_outcome_feature(_leduc("Jh", "Qs"), LEDUC)
        assert feature.counts == (3, 1, 0)
        assert feature.denominator == 4
        assert feature.fractions == (Fraction(3, 4), Fraction(1, 4), Fraction(0))
        assert winrate_outcome_feature(_leduc("Kh", "Qs"), LEDUC).counts == (1, 1, 2)

    def test_winrate_needs_final_phase(self):
        """Test the phase guard."""
        with pytest.raises(PhaseError):
            winrate_outcome_feature(_leduc("Jh"), LEDUC)

    def test_winrate_table_covers_classes(self):
        """Test one row per final class."""
        counts, opponents = winrate_table(LEDUC)
        assert counts.shape == (9, 3)
        assert opponents == 4
        assert np.all(counts.sum(axis=1) == 4)

    def test_paof_histograms(self):
        """Test next-phase class histograms of each preflop rank."""
        paoi = build_paoi(LEDUC)
        assert paof(_leduc("Jh"), paoi, LEDUC).counts == (1, 0, 4)
        assert paof(_leduc("Qh"), paoi, LEDUC).counts == (1, 2, 2)
        assert paof(_leduc("Kh"), paoi, LEDUC).counts == (1, 4, 0)
        hist = transition_histogram(_leduc("Qs"), paoi, LEDUC)
        assert hist.denominator == 5
        assert hist.probabilities.sum() == pytest.approx(1.0)

    def test_paof_needs_next_phase(self):
        """Test missing and meaningless next-phase maps."""
        with pytest.raises(DependencyError):
            paof(_leduc("Jh"), None, LEDUC)
        with pytest.raises(PhaseError):
            paof(_leduc("Jh", "Qs"), build_paoi(LEDUC), LEDUC)

    def test_ehs_equity(self):
        """Test exact expected equities."""
        assert ehs_equity(_leduc("Jh"), LEDUC) == Fraction(3, 10)
        assert ehs_equity(_leduc("Qs"), LEDUC) == Fraction(1, 2)
        assert ehs_equity(_leduc("Kh"), LEDUC) == Fraction(7, 10)
        assert ehs_equity(_leduc("Jh", "Qs"), LEDUC) == Fraction(1, 8)
        assert ehs_equity(_leduc("Qh", "Ks"), LEDUC) == Fraction(5, 8)
        assert ehs_equity(_leduc("Kh", "Ks"), LEDUC) == 1

    def test_extended_signals(self):
        """Test the final observations extending a preflop observation."""
        ext = extended_signals(_leduc("Qh"), 2, LEDUC)
        assert ext.rows.shape == (5,)
        final = get_index(LEDUC, 2)
        assert all(final.observation(int(r)).own_cards == (LEDUC.deck.parse("Qh"),) for r in ext.rows)
        with pytest.raises(PhaseError):
            extended_signals(_leduc("Qh", "Ks"), 1, LEDUC)


class TestLeducAbstractions:
    """Test Leduc maps and their class counts."""

    def test_li_counts(self):
        """Test LI keeps every rank class."""
        assert build_li(LEDUC).counts == (3, 9)

    def test_paoi_classes(self):
        """Test PAOI groups final observations by outcome."""
        paoi = build_paoi(LEDUC)
        assert paoi.counts == (3, 3)
        pairs = {_bucket(paoi, _leduc(h, b)) for h, b in [("Jh", "Js"), ("Qh", "Qs"), ("Kh", "Ks")]}
        weak = {_bucket(paoi, _leduc(h, b)) for h, b in [("Jh", "Qs"), ("Jh", "Ks"), ("Qh", "Js")]}
        middle = {_bucket(paoi, _leduc(h, b)) for h, b in [("Qh", "Ks"), ("Kh", "Js"), ("Kh", "Qs")]}
        assert len(pairs) == len(weak) == len(middle) == 1
        assert len(pairs | weak | middle) == 3

    def test_froi_and_kroi(self):
        """Test perfect recall splits PAOI classes by preflop class."""
        assert build_froi(LEDUC).counts == (3, 7)
        assert build_froi(LEDUC).algorithm == "froi"
        forgetful = build_kroi(LEDUC, [0, 0])
        assert forgetful == build_paoi(LEDUC)
        assert forgetful.algorithm == "kroi"
        assert kroi_feature(_leduc("Jh", "Qs"), 1, LEDUC).labels == (2, 2)

    def test_kroi_depth_range(self):
        """Test recall depth validation."""
        with pytest.raises(ParameterError):
            build_kroi(LEDUC, [0, 2])
        with pytest.raises(ParameterError):
            build_kroi(LEDUC, [0])
        with pytest.raises(ParameterError):
            kroi_feature(_leduc("Jh"), 1, LEDUC)

    def test_ehs_ranges(self):
        """Test equity ranges and lossless phases."""
        assert build_ehs(LEDUC, [0, 3]).counts == (3, 3)
        assert build_ehs(LEDUC, [1, 3]).counts == (1, 3)
        ehs = build_ehs(LEDUC, [2, 0])
        assert ehs.counts == (2, 9)
        assert _bucket(ehs, _leduc("Jh")) == _bucket(ehs, _leduc("Qh"))
        assert _bucket(ehs, _leduc("Kh")) != _bucket(ehs, _leduc("Qh"))
        with pytest.raises(ParameterError):
            build_ehs(LEDUC, [3])

    def test_paaemd(self):
        """Test clustering and seed determinism."""
        amap = build_paaemd(LEDUC, [0, 3], seed=0)
        assert amap.counts == (3, 3)
        assert check_refinement(amap, build_paoi(LEDUC)) == [True, True]
        clustered = build_paaemd(LEDUC, [2, 3], seed=11)
        assert clustered.counts == (2, 3)
        assert clustered == build_paaemd(LEDUC, [2, 3], seed=11)
        with pytest.raises(ParameterError):
            build_paaemd(LEDUC, [2], seed=0)

    def test_refinement_order(self):
        """Test LI refines FROI refines PAOI, and EHS is refined by PAOI on Leduc."""
        li, froi, paoi = build_li(LEDUC), build_froi(LEDUC), build_paoi(LEDUC)
        assert check_refinement(li, froi) == [True, True]
        assert check_refinement(froi, paoi) == [True, True]
        assert check_refinement(paoi, li) == [True, False]
        assert check_refinement(paoi, build_ehs(LEDUC, [2, 3])) == [True, True]
        assert check_refinement(build_kroi(LEDUC, [0, 1]), build_kroi(LEDUC, [0, 0])) == [True, True]

    def test_paoi_classes_share_outcomes(self):
        """Test that observations in one final PAOI class have identical outcome features."""
        paoi = build_paoi(LEDUC)
        counts, _ = winrate_table(LEDUC)
        for bucket in range(paoi.bucket_count(2)):
            members = counts[paoi.buckets[1] == bucket]
            assert (members == members[0]).all()

    def test_paoi_classes_share_equity(self):
        """Test that every PAOI class has one exact expected equity in every phase."""
        paoi = build_paoi(LEDUC)
        for phase in (1, 2):
            num, _ = expected_equity_table(LEDUC, phase)
            for bucket in range(paoi.bucket_count(phase)):
                members = num[paoi.buckets[phase - 1] == bucket]
                assert (members == members[0]).all()

    @pytest.mark.parametrize("seed", [0, 1, 7, 2026])
    @pytest.mark.parametrize("clusters", [[0, 1], [0, 2], [0, 3], [1, 3], [2, 2], [3, 1], [3, 5]])
    def test_paoi_refines_paaemd(self, clusters, seed):
        """Test that PAOI refines PAAEMD for every cluster count and seed tried."""
        assert check_refinement(build_paoi(LEDUC), build_paaemd(LEDUC, clusters, seed=seed)) == [True, True]

    @pytest.mark.parametrize("buckets", [[1, 1], [1, 2], [2, 3], [3, 3], [3, 6]])
    def test_paoi_refines_ehs(self, buckets):
        """Test that PAOI refines every EHS range split tried."""
        assert check_refinement(build_paoi(LEDUC), build_ehs(LEDUC, buckets)) == [True, True]

    def test_paoi_is_a_fixed_point(self):
        """Test that regrouping by outcomes under PAOI's own labels gives PAOI back."""
        paoi = build_paoi(LEDUC)
        counts, _ = winrate_table(LEDUC)
        regrouped = [np.unique(counts, axis=0, return_inverse=True)[1].reshape(-1)]
        for phase in range(LEDUC.phases - 1, 0, -1):
            rows = np.sort(child_labels(LEDUC, phase, paoi.buckets[phase]), axis=1)
            regrouped.insert(0, np.unique(rows, axis=0, return_inverse=True)[1].reshape(-1))
        again = map_from_labels(LEDUC.game_id, "paoi", regrouped)
        assert check_refinement(again, paoi) == [True, True]
        assert check_refinement(paoi, again) == [True, True]
        assert again.counts == paoi.counts

    def test_class_sizes(self):
        """Test raw observations per PAOI bucket."""
        sizes = class_sizes(build_paoi(LEDUC), LEDUC)
        assert sizes[0].tolist() == [2, 2, 2]
        assert sorted(sizes[1].tolist()) == [6, 12, 12]

    def test_refinement_across_games(self):
        """Test that maps of different games cannot be compared."""
        with pytest.raises(DomainError):
            check_refinement(build_li(LEDUC), AbstractionMap("numeral211", "li", (np.arange(3),) * 2))


class TestBuildMap:
    """Test algorithm dispatch."""

    def test_dispatch(self):
        """Test each algorithm name."""
        assert build_map(LEDUC, "none") is None
        assert build_map(LEDUC, "li") == build_li(LEDUC)
        assert build_map(LEDUC, "kroi", k=[0, 1]).algorithm == "froi"
        assert build_map(LEDUC, "ehs", buckets=[0, 3]).counts == (3, 3)
        assert phase_counts(LEDUC, "none") == (6, 30)
        assert phase_counts(LEDUC, "paoi") == (3, 3)

    def test_missing_parameters(self):
        """Test parameter errors."""
        with pytest.raises(ParameterError):
            build_map(LEDUC, "kroi")
        with pytest.raises(ParameterError):
            build_map(LEDUC, "paaemd")
        with pytest.raises(ParameterError):
            build_map(LEDUC, "kmeans")


class TestReferenceCounts:
    """Test the published hold'em class counts."""

    def test_lookup(self):
        """Test counts for the registered hold'em rules only."""
        assert reference_counts(HULH_CARDS, "li") == (169, 1_286_792, 55_190_538, 2_428_287_420)
        assert reference_counts(HULH_CARDS, "froi") == reference_counts(HULH_CARDS, "kroi", [0, 1, 2, 3])
        assert reference_counts(HULH_CARDS, "kroi", [0, 0, 0, 0]) == reference_counts(HULH_CARDS, "paoi")
        assert reference_counts(HULH_CARDS, "kroi", [0, 2, 0, 0]) is None
        assert reference_counts(HULH_CARDS, "ehs") is None
        assert reference_counts(LEDUC, "li") is None
        assert reference_counts(get_game("hulh-cards", {"ante": 2}), "li") is None

    def test_preflop_matches_tables(self):
        """Test the one hold'em phase that is built here against the published value."""
        assert get_index(HULH_CARDS, 1).canonical_count == reference_counts(HULH_CARDS, "li")[0]

    def test_recall_sits_between_paoi_and_li(self):
        """Test that every phase grows with recall depth from PAOI toward LI."""
        li = reference_counts(HULH_CARDS, "li")
        for phase in range(1, 5):
            by_depth = [reference_counts(HULH_CARDS, "kroi", [0] * (phase - 1) + [d] + [0] * (4 - phase))[phase - 1]
                        for d in range(phase)]
            assert by_depth == sorted(by_depth)
            assert by_depth[-1] <= li[phase - 1]

    def test_paoi_is_spindle_shaped(self):
        """Test that PAOI peaks mid-game while LI and FROI keep growing."""
        paoi = reference_counts(HULH_CARDS, "paoi")
        assert paoi[3] < paoi[1] < paoi[2]
        for algorithm in ("li", "froi"):
            counts = reference_counts(HULH_CARDS, algorithm)
            assert list(counts) == sorted(counts)


@pytest.mark.slow
class TestNumeral211Counts:
    """Test Numeral211 class counts per phase."""

    def test_li(self):
        """Test lossless class counts."""
        assert build_li(NUMERAL211).counts == (100, 2260, 62020)

    def test_paoi(self):
        """Test outcome isomorphism class counts."""
        assert build_paoi(NUMERAL211).counts == (100, 2250, 3957)

    def test_froi_and_kroi(self):
        """Test recall class counts."""
        assert build_froi(NUMERAL211).counts == (100, 2260, 51228)
        assert build_kroi(NUMERAL211, [0, 1, 1]).counts == (100, 2260, 51176)

    def test_paoi_bounds_ehs_and_paaemd(self):
        """Test that PAOI refines equity buckets and EMD clusters."""
        paoi = build_paoi(NUMERAL211)
        for phase in (1, 2, 3):
            num, _ = expected_equity_table(NUMERAL211, phase)
            for bucket in range(paoi.bucket_count(phase)):
                members = num[paoi.buckets[phase - 1] == bucket]
                assert (members == members[0]).all()
        assert all(check_refinement(paoi, build_ehs(NUMERAL211, [8, 50, 50])))
        assert all(check_refinement(paoi, build_paaemd(NUMERAL211, [0, 225, 396], seed=1)))

    def test_refinement_chain(self):
        """Test LI refines FROI refines PAOI on Numeral211."""
        li, froi, paoi = build_li(NUMERAL211), build_froi(NUMERAL211), build_paoi(NUMERAL211)
        assert all(check_refinement(li, froi))
        assert all(check_refinement(froi, paoi))

    @pytest.mark.parametrize("seed", [0, 3])
    @pytest.mark.parametrize("clusters", [[0, 50, 100], [0, 225, 396], [0, 1000, 2000]])
    def test_paoi_refines_paaemd_grid(self, clusters, seed):
        """Test that PAOI refines PAAEMD across cluster counts and seeds."""
        assert all(check_refinement(build_paoi(NUMERAL211), build_paaemd(NUMERAL211, clusters, seed=seed)))

    def test_paoi_is_a_fixed_point(self):
        """Test that regrouping by outcomes under PAOI's own labels gives PAOI back."""
        paoi = build_paoi(NUMERAL211)
        for phase in range(1, NUMERAL211.phases):
            rows = np.sort(child_labels(NUMERAL211, phase, paoi.buckets[phase]), axis=1)
            again = np.unique(rows, axis=0, return_inverse=True)[1].reshape(-1)
            pairs = np.stack([again, paoi.buckets[phase - 1]], axis=1)
            assert np.unique(pairs, axis=0).shape[0] == paoi.counts[phase - 1] == again.max() + 1
