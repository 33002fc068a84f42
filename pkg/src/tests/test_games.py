"""Test cases for game rules, payoffs and the public betting tree."""

from collections import defaultdict

import pytest

from src.soog.betting import BET, CALL, CHANCE_NODE, CHECK, DECISION, FOLD, FOLD_NODE, RAISE, SHOWDOWN_NODE
from src.soog.core import CHANCE, Action, History
from src.soog.errors import ConfigError, DomainError, PhaseError, RuleError
from src.soog.games import (
    HULH_CARDS,
    LEDUC,
    NUMERAL211,
    betting_key,
    game_step,
    get_game,
    get_tree,
    iter_histories,
    iter_terminals,
    legal_actions,
    next_actor,
    observation,
    replay,
    separable_completion,
    showdown_order,
)


def _play(*moves):
    """Build a Leduc history, assigning betting tokens to whoever is to act."""
    h = History()
    for m in moves:
        if isinstance(m, tuple):
            h = h + Action(CHANCE, m)
        else:
            h = h + Action(next_actor(LEDUC, h), m)
    return h


def _betting_trace(h):
    """Non-chance actions in place, deals reduced to a marker."""
    return tuple(CHANCE if a.is_chance else (a.actor, a.payload) for a in h.actions)


def _with_deals(h, deals):
    """``h`` with its deals replaced, in order, by ``deals``."""
    remaining = iter(deals)
    return History(tuple(Action(CHANCE, next(remaining)) if a.is_chance else a for a in h.actions))


class TestRegistry:
    """Test the game registry and overrides."""

    def test_builtin_games(self):
        """Test the registered parameters."""
        assert get_game("leduc").bets == (2, 2)
        assert get_game("numeral211").ante == 5
        assert get_game("numeral211").bets == (10, 20, 20)
        assert NUMERAL211.phases == 3
        assert HULH_CARDS.phases == 4

    def test_unknown_game(self):
        """Test that unknown ids raise DomainError."""
        with pytest.raises(DomainError):
            get_game("kuhn")

    def test_overrides(self):
        """Test chip overrides and rejection of unknown keys."""
        spec = get_game("numeral211", {"ante": 1, "bet.postflop": 4, "max_raises": 3})
        assert (spec.ante, spec.bets, spec.max_raises) == (1, (10, 4, 4), 3)
        with pytest.raises(ConfigError):
            get_game("leduc", {"rake": 1})
        with pytest.raises(ConfigError):
            get_game("leduc", {"ante": "x"})

    def test_card_layer_has_no_betting(self):
        """Test that the hold'em card layer refuses betting operations."""
        with pytest.raises(RuleError):
            get_tree(HULH_CARDS)
        with pytest.raises(RuleError):
            replay(HULH_CARDS, History())


class TestRules:
    """Test replaying Leduc histories."""

    def test_showdown_payoff(self):
        """Test that Q beats J at a checked-down showdown."""
        h = _play((0, 2), CHECK, CHECK, (4,), CHECK)
        assert next_actor(LEDUC, h) == 2
        result = game_step(LEDUC, h, Action(2, CHECK))
        assert result.utilities == (-1, 1)
        assert result.survival == (1, 1)

    def test_fold_payoff(self):
        """Test that folding loses the folder's contribution."""
        h = _play((0, 2), BET)
        result = game_step(LEDUC, h, Action(2, FOLD))
        assert result.utilities == (1, -1)
        assert result.survival == (1, 0)

    def test_raise_cap(self):
        """Test that two raises per phase exhaust the cap."""
        h = _play((0, 2), BET, RAISE)
        assert [a.payload for a in legal_actions(LEDUC, h)] == [FOLD, CALL]
        with pytest.raises(RuleError):
            replay(LEDUC, h + Action(1, RAISE))

    def test_out_of_turn(self):
        """Test that acting out of turn is a RuleError."""
        h = _play((0, 2))
        with pytest.raises(RuleError):
            replay(LEDUC, h + Action(2, CHECK))
        with pytest.raises(RuleError):
            replay(LEDUC, h + Action(CHANCE, (4,)))

    def test_pair_pot_after_raises(self):
        """Test a raised pot won by a pair."""
        h = _play((0, 2), BET, CALL, (1,), BET, RAISE)
        state, _ = replay(LEDUC, h)
        assert state.contributions == (5, 7)
        result = game_step(LEDUC, h, Action(1, CALL))
        assert result.utilities == (7, -7)

    def test_showdown_order_needs_final_signal(self):
        """Test the phase guard on showdown ordering."""
        _, theta = replay(LEDUC, _play((0, 2)))
        with pytest.raises(PhaseError):
            showdown_order(theta, LEDUC)

    def test_terminal_utilities_are_zero_sum(self):
        """Test zero-sum payoffs over every Leduc terminal history."""
        count = 0
        for _, result in iter_terminals(LEDUC):
            assert sum(result.utilities) == 0
            count += 1
        assert count > 0

    def test_showdown_order_matches_utilities(self):
        """Test every Leduc terminal's payoff against its fold or showdown order."""
        showdowns = folds = 0
        for h, result in iter_terminals(LEDUC):
            state, theta = replay(LEDUC, h)
            c1, c2 = state.contributions
            if state.folded:
                folder = state.folded
                assert result.utilities[folder - 1] == -state.contributions[folder - 1]
                assert result.survival[folder - 1] == 0 and result.survival[2 - folder] == 1
                folds += 1
                continue
            assert c1 == c2
            assert result.survival == (1, 1)
            order = showdown_order(theta, LEDUC)
            low1, low2 = order.precedes(1, 2), order.precedes(2, 1)
            assert low1 or low2
            if low1 and low2:
                assert result.utilities == (0, 0)
            elif low2:
                assert result.utilities == (c2, -c2)
            else:
                assert result.utilities == (-c1, c1)
            showdowns += 1
        assert showdowns > 0 and folds > 0


class TestObservations:
    """Test public keys and private observations of histories."""

    def test_betting_key_marks_later_deals(self):
        """Test that every deal after the hole deal adds a separator."""
        h = _play((0, 2), CHECK, CHECK, (4,), BET)
        assert betting_key(h) == (CHECK, CHECK, "/", BET)
        assert observation(LEDUC, h, 2).own_cards == (2,)
        assert observation(LEDUC, h, 1).board == ((4,),)

    def test_separable_completion(self):
        """Test moving another deal onto a betting line."""
        h1 = _play((0, 2), CHECK, CHECK, (4,))
        h2 = _play((1, 3), CHECK, CHECK, (5,))
        h1p = _play((0, 2), BET, CALL, (4,))
        completed = separable_completion(LEDUC, h1, h2, h1p)
        assert completed == _play((1, 3), BET, CALL, (5,))

    def test_betting_is_card_blind(self):
        """Test that histories differing only in deals offer the same moves everywhere in Leduc."""
        seen = {}
        for h, result in iter_histories(LEDUC):
            actor = next_actor(LEDUC, h)
            moves = () if actor in (None, CHANCE) else tuple(a.payload for a in legal_actions(LEDUC, h))
            shape = (result is not None, actor, moves)
            assert seen.setdefault(_betting_trace(h), shape) == shape
        assert len(seen) > 50

    @pytest.mark.parametrize("first, second", [
        (((0, 2), (4,)), ((1, 3), (5,))),
        (((5, 4), (0,)), ((0, 1), (5,))),
        (((2, 3), (1,)), ((3, 2), (0,))),
    ])
    def test_separable_completion_every_line(self, first, second):
        """Test completion for every pair of Leduc betting lines sharing a deal sequence."""
        by_deals = defaultdict(list)
        for h, _ in iter_histories(LEDUC):
            payloads = h.chance_payloads()
            if payloads == first[:len(payloads)]:
                by_deals[payloads].append(h)
        pairs = 0
        for lines in by_deals.values():
            for h1 in lines:
                h2 = _with_deals(h1, second)
                for h1p in lines:
                    assert separable_completion(LEDUC, h1, h2, h1p) == _with_deals(h1p, second)
                    pairs += 1
        assert pairs > 1000

    def test_separable_completion_premises(self):
        """Test that mismatched premises raise DomainError."""
        h1 = _play((0, 2), CHECK, CHECK, (4,))
        with pytest.raises(DomainError):
            separable_completion(LEDUC, h1, h1, _play((1, 3), CHECK))


class TestBettingTree:
    """Test the public betting tree."""

    def test_leduc_tree_shape(self):
        """Test decision counts and the root."""
        tree = get_tree(LEDUC)
        root = tree.nodes[0]
        assert root.kind == DECISION and root.actor == 1 and root.key == ()
        assert root.actions == (CHECK, BET)
        decisions = tree.decisions()
        assert len(decisions) == 6 + 5 * 6
        assert sum(1 for n in decisions if n.phase == 1) == 6
        assert len(tree.decisions(1)) == 3 + 15

    def test_chance_node_opens_next_phase(self):
        """Test chance node phase, key and single child."""
        tree = get_tree(LEDUC)
        chance = tree.node((CHECK, CHECK))
        assert chance.kind == CHANCE_NODE
        assert chance.phase == 2
        child = tree.nodes[chance.children[0]]
        assert child.key == (CHECK, CHECK, "/")
        assert child.actor == 1 and child.phase == 2

    def test_terminal_contributions(self):
        """Test fold and showdown nodes carry the pot split."""
        tree = get_tree(LEDUC)
        fold = tree.node((BET, FOLD))
        assert fold.kind == FOLD_NODE and fold.folder == 2
        assert fold.contributions == (3, 1)
        showdown = tree.node((BET, CALL, "/", BET, RAISE, CALL))
        assert showdown.kind == SHOWDOWN_NODE
        assert showdown.contributions == (7, 7)
        assert tree.node((BET, RAISE)).actions == (FOLD, CALL)

    def test_numeral211_raise_cap(self):
        """Test four bets per phase in Numeral211."""
        tree = get_tree(NUMERAL211)
        assert tree.node((BET, RAISE, RAISE, RAISE)).actions == (FOLD, CALL)
        assert tree.node((BET, RAISE, RAISE)).actions == (FOLD, CALL, RAISE)
        assert tree.node((BET, CALL)).phase == 2
