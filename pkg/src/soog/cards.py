"""Decks, card parsing and combination ranking."""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import DomainError

SUIT_SYMBOLS = {"♠": "s", "♥": "h", "♦": "d", "♣": "c"}


@dataclass(frozen=True)
class Deck:
    """A rank-major deck: card id = rank * len(suits) + suit."""
    ranks: str
    suits: str

    @property
    def size(self) -> int:
        return len(self.ranks) * len(self.suits)

    @property
    def suit_count(self) -> int:
        return len(self.suits)

    def card(self, rank: int, suit: int) -> int:
        return rank * len(self.suits) + suit

    def rank_of(self, card: int) -> int:
        return card // len(self.suits)

    def suit_of(self, card: int) -> int:
        return card % len(self.suits)

    def parse(self, text: str) -> int:
        """Parse a two-character card such as ``"Th"`` or ``"T♥"``."""
        text = text.strip()
        if len(text) != 2:
            raise DomainError(f"Malformed card: {text!r}")
        rank_char, suit_char = text[0].upper(), SUIT_SYMBOLS.get(text[1], text[1].lower())
        if rank_char not in self.ranks or suit_char not in self.suits:
            raise DomainError(f"Card {text!r} is not in deck {self.ranks}/{self.suits}")
        return self.card(self.ranks.index(rank_char), self.suits.index(suit_char))

    def parse_many(self, text: str | Iterable[str]) -> Tuple[int, ...]:
        if isinstance(text, str):
            text = text.replace(",", " ").split()
        return tuple(self.parse(item) for item in text)

    def format(self, card: int) -> str:
        self.check(card)
        return self.ranks[self.rank_of(card)] + self.suits[self.suit_of(card)]

    def format_many(self, cards: Iterable[int]) -> str:
        return " ".join(self.format(c) for c in cards)

    def check(self, *cards: int) -> None:
        for card in cards:
            if not 0 <= int(card) < self.size:
                raise DomainError(f"Card id {card} out of range for a {self.size}-card deck")


def combinations(values: Sequence[int] | np.ndarray, r: int) -> np.ndarray:
    """All r-combinations of ``values`` in lexicographic order, as an (N, r) array."""
    a = np.asarray(values, dtype=np.int64)
    if r == 0:
        return np.zeros((1, 0), dtype=np.int64)
    dt = np.dtype([("", a.dtype)] * r)
    b = np.fromiter(itertools.combinations(a, r), dt)
    return b.view(a.dtype).reshape(-1, r)


@lru_cache(maxsize=None)
def binomial_table(n: int, k: int) -> np.ndarray:
    """Table of C(a, b) for 0 <= a <= n, 0 <= b <= k."""
    table = np.zeros((n + 1, k + 1), dtype=np.int64)
    for a in range(n + 1):
        for b in range(min(a, k) + 1):
            table[a, b] = math.comb(a, b)
    return table


def combination_rank(positions: np.ndarray, n: int) -> np.ndarray:
    """Lexicographic rank of sorted combinations drawn from ``range(n)``.

    Args:
        positions: (N, k) array, each row strictly increasing
        n: size of the ground set

    Returns:
        (N,) int64 array; row ``i`` is the index of ``positions[i]`` in
        ``combinations(range(n), k)``
    """
    positions = np.asarray(positions, dtype=np.int64)
    k = positions.shape[1]
    if k == 0:
        return np.zeros(positions.shape[0], dtype=np.int64)
    table = binomial_table(n, k)
    offsets = k - np.arange(k)
    taken = table[n - 1 - positions, offsets[None, :]].sum(axis=1)
    return math.comb(n, k) - 1 - taken


def membership(rows: np.ndarray, deck_size: int) -> np.ndarray:
    """Boolean (N, deck_size) matrix marking the cards present in each row."""
    out = np.zeros((rows.shape[0], deck_size), dtype=bool)
    if rows.shape[1]:
        out[np.arange(rows.shape[0])[:, None], rows] = True
    return out


def remaining_cards(rows: np.ndarray, deck_size: int) -> np.ndarray:
    """Cards not used by each row, ascending; every row must use the same count."""
    free = ~membership(rows, deck_size)
    width = deck_size - rows.shape[1]
    return np.nonzero(free)[1].reshape(rows.shape[0], width)


def card_list(cards: Iterable[int]) -> List[int]:
    """Sorted, duplicate-checked list of card ids."""
    out = sorted(int(c) for c in cards)
    if len(set(out)) != len(out):
        raise DomainError(f"Duplicate cards in {out}")
    return out
