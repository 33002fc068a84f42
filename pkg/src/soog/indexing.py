"""Per-phase observation tables: raw enumeration, canonical classes and lookups.

Raw observations of phase r are enumerated nested: every phase-r row extends
exactly one phase-(r-1) row and each parent has the same number of children,
so ``parent = row // fanout`` and ``children = [row * fanout, (row + 1) * fanout)``.
Rows list the hole cards, then each board group, every group ascending.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, List, Sequence

import numpy as np

from .cards import combination_rank, combinations, remaining_cards
from .core import CanonicalIndex, ObservationInfoset
from .errors import DomainError, PhaseError
from .games import GameSpec

logger = logging.getLogger(__name__)

# Above this many raw rows a phase is outside desk-scale enumeration.
MAX_RAW_ROWS = 20_000_000


def group_sizes(spec: GameSpec, phase: int) -> List[int]:
    return [spec.holes] + [b for b in spec.board[1:phase] if b > 0]


def _sort_groups(cards: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    out = np.empty_like(cards)
    start = 0
    for size in sizes:
        out[:, start:start + size] = np.sort(cards[:, start:start + size], axis=1)
        start += size
    return out


def _encode(values: np.ndarray, base: int) -> np.ndarray:
    key = np.zeros(values.shape[0], dtype=np.int64)
    for col in range(values.shape[1]):
        key = key * base + values[:, col]
    return key


def canonical_keys(spec: GameSpec, cards: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    """Key of the lexicographically least relabeling of each row.

    ``suits`` symmetry minimises over all suit permutations; ``cards``
    symmetry keeps ranks only.
    """
    deck = spec.deck
    cards = np.asarray(cards, dtype=np.int64)
    if spec.symmetry == "cards":
        return _encode(_sort_groups(cards // deck.suit_count, sizes), len(deck.ranks))
    ranks, suits = np.divmod(cards, deck.suit_count)
    best = None
    for perm in itertools.permutations(range(deck.suit_count)):
        mapped = ranks * deck.suit_count + np.asarray(perm, dtype=np.int64)[suits]
        key = _encode(_sort_groups(mapped, sizes), deck.size)
        best = key if best is None else np.minimum(best, key)
    return best


@dataclass(frozen=True)
class InfosetEnumeration:
    phase: int
    raw_count: int
    canonical_count: int
    index: "ObservationIndex"

    def __iter__(self) -> Iterator[CanonicalIndex]:
        for c in self.index.raw_to_canonical.tolist():
            yield CanonicalIndex(self.phase, c)

    def ranges(self, parts: int) -> List[range]:
        """Disjoint raw-row ranges for splitting the enumeration across workers."""
        bounds = np.linspace(0, self.raw_count, parts + 1).astype(np.int64)
        return [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


class ObservationIndex:
    """Observation table for one game phase."""

    def __init__(self, spec: GameSpec, phase: int, parent: "ObservationIndex | None" = None):
        if not 1 <= phase <= spec.phases:
            raise PhaseError(f"Phase {phase} outside 1..{spec.phases}")
        self.spec = spec
        self.phase = phase
        self.sizes = group_sizes(spec, phase)
        n = spec.deck.size
        if phase == 1:
            self.raw_cards = combinations(range(n), spec.holes)
            self.fanout = self.raw_cards.shape[0]
        else:
            parent = parent or get_index(spec, phase - 1)
            width = spec.board[phase - 1]
            free = n - parent.raw_cards.shape[1]
            positions = combinations(range(free), width)
            self.fanout = positions.shape[0]
            if parent.raw_cards.shape[0] * self.fanout > MAX_RAW_ROWS:
                raise DomainError(
                    f"{spec.game_id} phase {phase} has "
                    f"{parent.raw_cards.shape[0] * self.fanout} raw observations; "
                    "beyond desk-scale enumeration"
                )
            remaining = remaining_cards(parent.raw_cards, n)
            dealt = remaining[:, positions].reshape(-1, width)
            self.raw_cards = np.concatenate(
                [np.repeat(parent.raw_cards, self.fanout, axis=0), dealt], axis=1
            )
        keys = canonical_keys(spec, self.raw_cards, self.sizes)
        self.keys, self.first_raw, inverse, self.class_sizes = np.unique(
            keys, return_index=True, return_inverse=True, return_counts=True
        )
        self.raw_to_canonical = inverse.reshape(-1).astype(np.int64)
        logger.info(
            f"{spec.game_id} phase {phase}: {self.raw_count} raw, "
            f"{self.canonical_count} canonical observations"
        )

    @property
    def raw_count(self) -> int:
        return self.raw_cards.shape[0]

    @property
    def canonical_count(self) -> int:
        return self.keys.shape[0]

    def canonical_of(self, cards: np.ndarray) -> np.ndarray:
        """Canonical index per row of observation cards (hole, then board groups)."""
        cards = np.atleast_2d(np.asarray(cards, dtype=np.int64))
        self._check_rows(cards)
        keys = canonical_keys(self.spec, cards, self.sizes)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, self.canonical_count - 1)
        if not np.array_equal(self.keys[pos], keys):
            raise DomainError("Observation not found in canonical table")
        return pos

    def raw_rank(self, cards: np.ndarray) -> np.ndarray:
        """Raw row of each observation in the nested enumeration."""
        cards = _sort_groups(np.atleast_2d(np.asarray(cards, dtype=np.int64)), self.sizes)
        self._check_rows(cards)
        n = self.spec.deck.size
        h = self.sizes[0]
        rank = combination_rank(cards[:, :h], n)
        start, used = h, h
        for size in self.sizes[1:]:
            group = cards[:, start:start + size]
            below = (group[:, :, None] > cards[:, None, :start]).sum(axis=2)
            rank = rank * math.comb(n - used, size)
            rank = rank + combination_rank(group - below, n - used)
            start += size
            used += size
        return rank

    def _check_rows(self, cards: np.ndarray) -> None:
        if cards.shape[1] != sum(self.sizes):
            raise DomainError(f"Phase {self.phase} observations have {sum(self.sizes)} cards")
        if cards.size and (cards.min() < 0 or cards.max() >= self.spec.deck.size):
            raise DomainError("Card id out of range for the deck")
        ordered = np.sort(cards, axis=1)
        if cards.shape[1] > 1 and (np.diff(ordered, axis=1) == 0).any():
            raise DomainError("Observation repeats a card")

    def canonical_index(self, obs: ObservationInfoset) -> CanonicalIndex:
        if obs.phase != self.phase:
            raise PhaseError(f"Observation phase {obs.phase} vs table phase {self.phase}")
        if len(obs.own_cards) != self.spec.holes:
            raise DomainError(f"Expected {self.spec.holes} hole cards")
        for group, size in zip(obs.board, self.spec.board[1:]):
            if len(group) != size:
                raise DomainError(f"Board group {group} should hold {size} cards")
        index = int(self.canonical_of(np.asarray([obs.cards()]))[0])
        return CanonicalIndex(self.phase, index)

    def representative(self, index: int, owner: int = 1) -> ObservationInfoset:
        """Lexicographically least observation of a canonical class."""
        if not 0 <= index < self.canonical_count:
            raise DomainError(f"Canonical index {index} out of range")
        return self.observation(int(self.first_raw[index]), owner)

    def observation(self, raw: int, owner: int = 1) -> ObservationInfoset:
        row = self.raw_cards[raw].tolist()
        h = self.sizes[0]
        board, start = [], h
        for size in self.spec.board[1:self.phase]:
            board.append(tuple(row[start:start + size]))
            start += size
        return ObservationInfoset(owner=owner, own_cards=tuple(row[:h]), board=tuple(board))

    def parent_raw(self, rows: np.ndarray) -> np.ndarray:
        if self.phase == 1:
            raise PhaseError("Phase-1 observations have no parent")
        return np.asarray(rows) // self.fanout

    def children_raw(self, rows: np.ndarray) -> np.ndarray:
        """(N, fanout) rows of the next phase extending each row."""
        child = get_index(self.spec, self.phase + 1)
        rows = np.asarray(rows, dtype=np.int64)
        return rows[:, None] * child.fanout + np.arange(child.fanout)[None, :]


@lru_cache(maxsize=None)
def get_index(spec: GameSpec, phase: int) -> ObservationIndex:
    if phase > 1:
        return ObservationIndex(spec, phase, get_index(spec, phase - 1))
    return ObservationIndex(spec, phase)


def canonical_index(obs: ObservationInfoset, spec: GameSpec) -> CanonicalIndex:
    """Canonical index of an observation; suit-isomorphic observations collide."""
    return get_index(spec, obs.phase).canonical_index(obs)


def representative(ci: CanonicalIndex, spec: GameSpec, owner: int = 1) -> ObservationInfoset:
    return get_index(spec, ci.phase).representative(ci.index, owner)


def enumerate_infosets(spec: GameSpec, phase: int) -> InfosetEnumeration:
    """Raw and canonical counts plus an iterator over every raw observation's class."""
    index = get_index(spec, phase)
    return InfosetEnumeration(phase, index.raw_count, index.canonical_count, index)


def raw_observation_count(spec: GameSpec, phase: int) -> int:
    """Raw observations of one player at ``phase``, counted without enumerating them."""
    if not 1 <= phase <= spec.phases:
        raise PhaseError(f"Phase {phase} outside 1..{spec.phases}")
    n = spec.deck.size
    count, used = math.comb(n, spec.holes), spec.holes
    for width in spec.board[1:phase]:
        count *= math.comb(n - used, width)
        used += width
    return count
