"""Test cases for observation tables and lossless isomorphism."""

import numpy as np
import pytest

from src.soog.core import ObservationInfoset
from src.soog.errors import DomainError, PhaseError
from src.soog.games import HULH_CARDS, LEDUC, NUMERAL211
from src.soog.indexing import canonical_index, enumerate_infosets, get_index, raw_observation_count, representative


def _obs(spec, hole, *board):
    deck = spec.deck
    return ObservationInfoset(
        owner=1,
        own_cards=deck.parse_many(hole),
        board=tuple(deck.parse_many(group) for group in board),
    )


class TestCounts:
    """Test raw and canonical counts per phase."""

    def test_leduc(self):
        """Test Leduc rank-only classes."""
        assert (get_index(LEDUC, 1).raw_count, get_index(LEDUC, 1).canonical_count) == (6, 3)
        assert (get_index(LEDUC, 2).raw_count, get_index(LEDUC, 2).canonical_count) == (30, 9)

    def test_numeral211_early_phases(self):
        """Test Numeral211 preflop and flop classes."""
        assert (get_index(NUMERAL211, 1).raw_count, get_index(NUMERAL211, 1).canonical_count) == (780, 100)
        assert (get_index(NUMERAL211, 2).raw_count, get_index(NUMERAL211, 2).canonical_count) == (29640, 2260)

    @pytest.mark.slow
    def test_numeral211_final_phase(self):
        """Test Numeral211 river classes."""
        index = get_index(NUMERAL211, 3)
        assert (index.raw_count, index.canonical_count) == (1096680, 62020)
        assert index.class_sizes.sum() == index.raw_count

    def test_hulh_preflop(self):
        """Test the 169 preflop classes of hold'em."""
        index = get_index(HULH_CARDS, 1)
        assert (index.raw_count, index.canonical_count) == (1326, 169)

    def test_hulh_flop_beyond_enumeration(self):
        """Test that hold'em flop tables are refused."""
        with pytest.raises(DomainError):
            get_index(HULH_CARDS, 2)

    @pytest.mark.parametrize("spec", [LEDUC, NUMERAL211], ids=["leduc", "numeral211"])
    def test_raw_count_formula_matches_enumeration(self, spec):
        """Test the combinatorial raw count against the enumerated tables."""
        for phase in range(1, spec.phases + 1):
            assert raw_observation_count(spec, phase) == get_index(spec, phase).raw_count

    def test_hulh_raw_counts(self):
        """Test hold'em raw observation counts per phase, including the unbuildable ones."""
        counts = [raw_observation_count(HULH_CARDS, p) for p in range(1, 5)]
        assert counts == [1326, 25_989_600, 1_221_511_200, 56_189_515_200]
        with pytest.raises(PhaseError):
            raw_observation_count(HULH_CARDS, 5)

    def test_phase_out_of_range(self):
        """Test the phase guard."""
        with pytest.raises(PhaseError):
            get_index(LEDUC, 0)
        with pytest.raises(PhaseError):
            get_index(LEDUC, 3)


class TestLookups:
    """Test ranking, canonical lookup and representatives."""

    @pytest.mark.parametrize("spec,phase", [(LEDUC, 2), (NUMERAL211, 1), (NUMERAL211, 2)])
    def test_raw_rank_inverts_enumeration(self, spec, phase):
        """Test that raw_rank recovers each row's position."""
        index = get_index(spec, phase)
        assert np.array_equal(index.raw_rank(index.raw_cards), np.arange(index.raw_count))

    def test_nested_enumeration(self):
        """Test parent and child row arithmetic."""
        flop = get_index(NUMERAL211, 2)
        rows = np.array([0, 17, 779])
        children = get_index(NUMERAL211, 1).children_raw(rows)
        assert children.shape == (3, flop.fanout)
        assert np.array_equal(flop.parent_raw(children[:, 5]), rows)
        assert np.array_equal(flop.raw_cards[children[1, 0], :2], get_index(NUMERAL211, 1).raw_cards[17])

    def test_suit_isomorphic_observations_collide(self):
        """Test that relabeling suits keeps the class and breaking suitedness does not."""
        a = canonical_index(_obs(NUMERAL211, "As 2s", "3s"), NUMERAL211)
        b = canonical_index(_obs(NUMERAL211, "Ah 2h", "3h"), NUMERAL211)
        c = canonical_index(_obs(NUMERAL211, "As 2h", "3s"), NUMERAL211)
        assert a == b
        assert a != c

    def test_leduc_ignores_suits(self):
        """Test that Leduc classes depend on ranks only."""
        a = canonical_index(_obs(LEDUC, "Jh", "Qs"), LEDUC)
        b = canonical_index(_obs(LEDUC, "Js", "Qh"), LEDUC)
        assert a == b

    def test_hole_order_is_irrelevant(self):
        """Test that hole cards are a set."""
        a = canonical_index(_obs(NUMERAL211, "7d 3c"), NUMERAL211)
        b = canonical_index(_obs(NUMERAL211, "3c 7d"), NUMERAL211)
        assert a == b

    def test_representatives_round_trip(self):
        """Test that every class representative maps back to its class."""
        for phase in (1, 2):
            index = get_index(NUMERAL211, phase)
            for i in range(0, index.canonical_count, 37):
                rep = representative(canonical_index(index.representative(i), NUMERAL211), NUMERAL211)
                assert canonical_index(rep, NUMERAL211).index == i

    def test_lookup_errors(self):
        """Test wrong phase and out-of-range class ids."""
        index = get_index(NUMERAL211, 1)
        with pytest.raises(PhaseError):
            index.canonical_index(_obs(NUMERAL211, "As 2s", "3s"))
        with pytest.raises(DomainError):
            index.representative(100)
        with pytest.raises(DomainError):
            index.canonical_of(np.array([[0, 0]]))

    def test_enumeration_ranges(self):
        """Test worker ranges partition the raw rows."""
        enum = enumerate_infosets(NUMERAL211, 1)
        assert (enum.raw_count, enum.canonical_count) == (780, 100)
        parts = enum.ranges(4)
        assert parts[0].start == 0 and parts[-1].stop == 780
        assert sum(len(r) for r in parts) == 780
        assert len(set(c.index for c in enum)) == 100
