"""Hand evaluators for Leduc, Numeral211 and heads-up limit hold'em."""

import itertools
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property, total_ordering
from typing import Dict, List, Sequence, Tuple, Type

import numpy as np

from .cards import Deck, card_list, combinations
from .errors import DomainError

_DIGIT = 16
_WIDTH = 5


class LeducCategory(IntEnum):
    HIGH_CARD = 0
    PAIR = 1


class Numeral211Category(IntEnum):
    HIGH_CARD = 0
    PAIR = 1
    FLUSH = 2
    STRAIGHT = 3
    THREE_OF_A_KIND = 4
    STRAIGHT_FLUSH = 5


class HoldemCategory(IntEnum):
    HIGH_CARD = 0
    PAIR = 1
    TWO_PAIR = 2
    THREE_OF_A_KIND = 3
    STRAIGHT = 4
    FLUSH = 5
    FULL_HOUSE = 6
    FOUR_OF_A_KIND = 7
    STRAIGHT_FLUSH = 8


@total_ordering
@dataclass(frozen=True)
class HandRank:
    """Category plus rank tiebreak; compares by category first."""
    category: IntEnum
    tiebreak: Tuple[int, ...]

    @property
    def value(self) -> int:
        digits = list(self.tiebreak) + [0] * (_WIDTH - len(self.tiebreak))
        out = int(self.category)
        for d in digits:
            out = out * _DIGIT + d
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HandRank):
            return NotImplemented
        return self.value == other.value

    def __lt__(self, other: "HandRank") -> bool:
        return self.value < other.value

    def __hash__(self) -> int:
        return hash(self.value)


class HandEvaluator:
    """Base evaluator; subclasses define how hole and board cards combine."""

    category_type: Type[IntEnum]

    def __init__(self, deck: Deck, holes: int):
        self.deck = deck
        self.holes = holes

    def allowed_sizes(self) -> Sequence[int]:
        raise NotImplementedError

    def rank(self, hole: Sequence[int], board: Sequence[int]) -> HandRank:
        raise NotImplementedError

    def evaluate(self, cards: Sequence[int], board: Sequence[int] = ()) -> HandRank:
        """Validate the card set, then rank the best hand it contains."""
        hole = card_list(cards)
        table = card_list(board)
        self.deck.check(*hole, *table)
        if set(hole) & set(table):
            raise DomainError(f"Hole {hole} and board {table} share cards")
        total = len(hole) + len(table)
        if total not in self.allowed_sizes():
            raise DomainError(
                f"{type(self).__name__} ranks {list(self.allowed_sizes())} cards, got {total}"
            )
        return self.rank(hole, table)

    def strengths(self, holes: np.ndarray, boards: np.ndarray) -> np.ndarray:
        """Integer strength per row; larger wins. Rows are (hole, board) pairs."""
        return np.fromiter(
            (self.rank(list(h), list(b)).value for h, b in zip(holes.tolist(), boards.tolist())),
            dtype=np.int64,
            count=holes.shape[0],
        )


class LeducEvaluator(HandEvaluator):
    """A pair with the board beats any high card; high card compares the hole rank."""

    category_type = LeducCategory

    def allowed_sizes(self) -> Sequence[int]:
        return (self.holes + 1,)

    def rank(self, hole: Sequence[int], board: Sequence[int]) -> HandRank:
        if len(board) != 1:
            raise DomainError("Leduc hands are one hole card plus one board card")
        own = max(self.deck.rank_of(c) for c in hole)
        if any(self.deck.rank_of(c) == self.deck.rank_of(board[0]) for c in hole):
            return HandRank(LeducCategory.PAIR, (own,))
        return HandRank(LeducCategory.HIGH_CARD, (own,))

    def strengths(self, holes: np.ndarray, boards: np.ndarray) -> np.ndarray:
        suits = self.deck.suit_count
        hole_ranks = holes // suits
        board_rank = boards[:, 0] // suits
        paired = (hole_ranks == board_rank[:, None]).any(axis=1)
        own = hole_ranks.max(axis=1)
        category = paired.astype(np.int64)
        return (category * _DIGIT + own) * _DIGIT ** (_WIDTH - 1)


def _three_card_rank(ranks: List[int], suits: List[int]) -> HandRank:
    ranks = sorted(ranks, reverse=True)
    flush = len(set(suits)) == 1
    straight = ranks[0] - ranks[1] == 1 and ranks[1] - ranks[2] == 1
    if straight and flush:
        return HandRank(Numeral211Category.STRAIGHT_FLUSH, (ranks[0],))
    if ranks[0] == ranks[2]:
        return HandRank(Numeral211Category.THREE_OF_A_KIND, (ranks[0],))
    if straight:
        return HandRank(Numeral211Category.STRAIGHT, (ranks[0],))
    if flush:
        return HandRank(Numeral211Category.FLUSH, tuple(ranks))
    if ranks[0] == ranks[1] or ranks[1] == ranks[2]:
        pair = ranks[1]
        kicker = ranks[2] if ranks[0] == ranks[1] else ranks[0]
        return HandRank(Numeral211Category.PAIR, (pair, kicker))
    return HandRank(Numeral211Category.HIGH_CARD, tuple(ranks))


class Numeral211Evaluator(HandEvaluator):
    """Best three cards out of the hole and board.

    Ranks run A (low) to T (high); straights are three consecutive ranks
    without wrap-around.
    """

    category_type = Numeral211Category

    def allowed_sizes(self) -> Sequence[int]:
        return (3, 4)

    def rank(self, hole: Sequence[int], board: Sequence[int]) -> HandRank:
        cards = list(hole) + list(board)
        best = None
        for trio in itertools.combinations(cards, 3):
            hand = _three_card_rank(
                [self.deck.rank_of(c) for c in trio], [self.deck.suit_of(c) for c in trio]
            )
            if best is None or hand > best:
                best = hand
        return best

    @cached_property
    def three_card_table(self) -> np.ndarray:
        """Dense strength lookup indexed by three ascending card ids."""
        n = self.deck.size
        table = np.full((n, n, n), -1, dtype=np.int64)
        for trio in combinations(range(n), 3).tolist():
            hand = _three_card_rank(
                [self.deck.rank_of(c) for c in trio], [self.deck.suit_of(c) for c in trio]
            )
            table[trio[0], trio[1], trio[2]] = hand.value
        return table

    def strengths(self, holes: np.ndarray, boards: np.ndarray) -> np.ndarray:
        cards = np.sort(np.concatenate([holes, boards], axis=1), axis=1)
        table = self.three_card_table
        best = np.full(cards.shape[0], -1, dtype=np.int64)
        for a, b, c in itertools.combinations(range(cards.shape[1]), 3):
            np.maximum(best, table[cards[:, a], cards[:, b], cards[:, c]], out=best)
        return best


def _five_card_rank(ranks: List[int], suits: List[int]) -> HandRank:
    counts = Counter(ranks)
    groups = sorted(counts.items(), key=lambda kv: (kv[1], kv[0]), reverse=True)
    ordered = [r for r, n in groups for _ in range(n)]
    flush = len(set(suits)) == 1
    distinct = sorted(set(ranks), reverse=True)
    straight_top = None
    if len(distinct) == 5:
        if distinct[0] - distinct[4] == 4:
            straight_top = distinct[0]
        elif distinct == [12, 3, 2, 1, 0]:
            straight_top = 3
    if straight_top is not None and flush:
        return HandRank(HoldemCategory.STRAIGHT_FLUSH, (straight_top,))
    shape = [n for _, n in groups]
    if shape[0] == 4:
        return HandRank(HoldemCategory.FOUR_OF_A_KIND, (ordered[0], ordered[4]))
    if shape[:2] == [3, 2]:
        return HandRank(HoldemCategory.FULL_HOUSE, (ordered[0], ordered[3]))
    if flush:
        return HandRank(HoldemCategory.FLUSH, tuple(distinct))
    if straight_top is not None:
        return HandRank(HoldemCategory.STRAIGHT, (straight_top,))
    if shape[0] == 3:
        return HandRank(HoldemCategory.THREE_OF_A_KIND, (ordered[0], ordered[3], ordered[4]))
    if shape[:2] == [2, 2]:
        return HandRank(HoldemCategory.TWO_PAIR, (ordered[0], ordered[2], ordered[4]))
    if shape[0] == 2:
        return HandRank(HoldemCategory.PAIR, tuple(ordered[i] for i in (0, 2, 3, 4)))
    return HandRank(HoldemCategory.HIGH_CARD, tuple(distinct))


class HoldemEvaluator(HandEvaluator):
    """Best five of up to seven cards; the ace also plays low in A-2-3-4-5."""

    category_type = HoldemCategory

    def allowed_sizes(self) -> Sequence[int]:
        return (5, 6, 7)

    def rank(self, hole: Sequence[int], board: Sequence[int]) -> HandRank:
        cards = list(hole) + list(board)
        return max(
            _five_card_rank(
                [self.deck.rank_of(c) for c in five], [self.deck.suit_of(c) for c in five]
            )
            for five in itertools.combinations(cards, 5)
        )


EVALUATORS: Dict[str, Type[HandEvaluator]] = {
    "leduc": LeducEvaluator,
    "best3": Numeral211Evaluator,
    "best5": HoldemEvaluator,
}
