"""Hand-vector tables: hole combos, public boards and card-removal-aware terminal sums.

Public boards are enumerated nested per phase like observations, but
without hole cards. Every array indexed ``[board, hole]`` treats pairs that
share a card as invalid; reach vectors are zero there.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import List, Tuple

import numpy as np

from .cards import combination_rank, combinations, membership, remaining_cards
from .errors import DomainError, ParameterError
from .games import GameSpec, get_evaluator

logger = logging.getLogger(__name__)

MAX_TABLE_CELLS = 50_000_000
_CHUNK = 2048


def _row_search(sorted_rows: np.ndarray, queries: np.ndarray, side: str) -> np.ndarray:
    """Row-wise ``searchsorted`` for nonnegative integer rows."""
    rows, width = sorted_rows.shape
    span = int(max(sorted_rows.max(initial=0), queries.max(initial=0))) + 1
    offset = (np.arange(rows, dtype=np.int64) * span)[:, None]
    flat = (sorted_rows + offset).ravel()
    found = np.searchsorted(flat, (queries + offset).ravel(), side=side)
    return found.reshape(queries.shape) - np.arange(rows, dtype=np.int64)[:, None] * width


@dataclass
class _SortedStrengths:
    """Sort order of one strength matrix with < and <= boundaries per cell."""
    order: np.ndarray
    below: np.ndarray
    upto: np.ndarray

    @classmethod
    def of(cls, strength: np.ndarray) -> "_SortedStrengths":
        shifted = strength + 1
        order = np.argsort(shifted, axis=1, kind="stable")
        ordered = np.take_along_axis(shifted, order, axis=1)
        return cls(
            order=order,
            below=_row_search(ordered, shifted, "left"),
            upto=_row_search(ordered, shifted, "right"),
        )

    def sums(self, reach: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per cell: reach strictly weaker, reach strictly stronger, total."""
        cs = np.zeros((reach.shape[0], reach.shape[1] + 1))
        np.cumsum(np.take_along_axis(reach, self.order, axis=1), axis=1, out=cs[:, 1:])
        weaker = np.take_along_axis(cs, self.below, axis=1)
        stronger = cs[:, -1:] - np.take_along_axis(cs, self.upto, axis=1)
        return weaker, stronger, cs[:, -1:]


class HandTables:
    """Hole and board enumerations for one game."""

    def __init__(self, spec: GameSpec):
        if spec.holes > 2:
            raise ParameterError("Card-removal sums support one or two hole cards")
        self.spec = spec
        n = spec.deck.size
        self.deck_size = n
        self.holes = combinations(range(n), spec.holes)
        self.hole_mask = membership(self.holes, n)
        self.boards: List[np.ndarray] = [np.zeros((1, 0), dtype=np.int64)]
        self.board_fanout: List[int] = [1]
        for phase in range(2, spec.phases + 1):
            parent = self.boards[-1]
            width = spec.board[phase - 1]
            positions = combinations(range(n - parent.shape[1]), width)
            cells = parent.shape[0] * positions.shape[0] * self.holes.shape[0]
            if cells > MAX_TABLE_CELLS:
                raise DomainError(
                    f"{spec.game_id} phase {phase} hand tables need {cells} cells; beyond desk scale"
                )
            dealt = remaining_cards(parent, n)[:, positions].reshape(-1, width)
            self.boards.append(np.concatenate(
                [np.repeat(parent, positions.shape[0], axis=0), dealt], axis=1
            ))
            self.board_fanout.append(positions.shape[0])
        self.valid = [
            ~(membership(b, n).astype(np.int32) @ self.hole_mask.T.astype(np.int32)).astype(bool)
            for b in self.boards
        ]
        logger.info(
            f"{spec.game_id} hand tables: {self.hole_count} holes, "
            f"boards per phase {[b.shape[0] for b in self.boards]}"
        )

    @property
    def hole_count(self) -> int:
        return self.holes.shape[0]

    def board_count(self, phase: int) -> int:
        return self.boards[phase - 1].shape[0]

    @property
    def hole_pair_count(self) -> int:
        """Ordered (player 1, player 2) hole deals."""
        return self.hole_count * math.comb(self.deck_size - self.spec.holes, self.spec.holes)

    def chance_count(self, phase: int) -> int:
        """Equally likely board deals opening ``phase`` once both holes are known."""
        used = 2 * self.spec.holes + sum(self.spec.board[:phase - 1])
        return math.comb(self.deck_size - used, self.spec.board[phase - 1])

    def observation_cards(self, phase: int) -> np.ndarray:
        """(boards * holes, cards) observation rows in ``[board, hole]`` order."""
        boards = self.boards[phase - 1]
        b, h = boards.shape[0], self.hole_count
        return np.concatenate(
            [np.tile(self.holes, (b, 1)), np.repeat(boards, h, axis=0)], axis=1
        )

    @cached_property
    def disjoint(self) -> np.ndarray:
        """(H, H) True when two holes share no card."""
        m = self.hole_mask.astype(np.int32)
        return (m @ m.T) == 0

    @cached_property
    def board_sets(self) -> np.ndarray:
        return combinations(range(self.deck_size), sum(self.spec.board))

    @cached_property
    def strength_by_set(self) -> np.ndarray:
        """(board sets, H) showdown strength; -1 where hole and board collide."""
        sets = self.board_sets
        valid = ~(membership(sets, self.deck_size).astype(np.int32)
                  @ self.hole_mask.T.astype(np.int32)).astype(bool)
        out = np.full(valid.shape, -1, dtype=np.int64)
        b_idx, h_idx = np.nonzero(valid)
        evaluator = get_evaluator(self.spec)
        out[b_idx, h_idx] = evaluator.strengths(self.holes[h_idx], sets[b_idx])
        return out

    def set_index(self, boards: np.ndarray) -> np.ndarray:
        return combination_rank(np.sort(boards, axis=1), self.deck_size)

    @cached_property
    def final_strength(self) -> np.ndarray:
        """(final boards, H) strength for ordered final boards."""
        return self.strength_by_set[self.set_index(self.boards[-1])]

    @cached_property
    def _showdown_sort(self) -> Tuple[_SortedStrengths, List[Tuple[np.ndarray, _SortedStrengths]]]:
        strength = self.final_strength
        per_card = []
        for card in range(self.deck_size):
            members = np.nonzero(self.hole_mask[:, card])[0]
            per_card.append((members, _SortedStrengths.of(strength[:, members])))
        return _SortedStrengths.of(strength), per_card

    def showdown_margin(self, reach: np.ndarray) -> np.ndarray:
        """Opponent reach beaten minus opponent reach losing, per final [board, hole].

        ``reach`` is the opponent's (final boards, H) reach; holes sharing a
        card with the evaluated hole are excluded by inclusion-exclusion.
        """
        overall, per_card = self._showdown_sort
        weaker, stronger, _ = overall.sums(reach)
        for members, sorted_card in per_card:
            w, s, _ = sorted_card.sums(reach[:, members])
            weaker[:, members] -= w
            stronger[:, members] -= s
        return (weaker - stronger) * self.valid[-1]

    def disjoint_reach(self, reach: np.ndarray, phase: int) -> np.ndarray:
        """Opponent reach over holes sharing no card with each hole."""
        per_card = reach @ self.hole_mask
        touching = per_card @ self.hole_mask.T
        total = reach.sum(axis=1, keepdims=True)
        out = total - touching
        if self.spec.holes == 2:
            out = out + reach
        return out * self.valid[phase - 1]

    def winrate_counts(self, hole_idx: np.ndarray, set_idx: np.ndarray) -> np.ndarray:
        """(N, 3) loss/tie/win counts over opponent holes for final observations."""
        strength = self.strength_by_set
        out = np.zeros((hole_idx.shape[0], 3), dtype=np.int64)
        for start in range(0, hole_idx.shape[0], _CHUNK):
            h = hole_idx[start:start + _CHUNK]
            s = set_idx[start:start + _CHUNK]
            own = strength[s, h][:, None]
            opp = strength[s]
            valid = (opp >= 0) & self.disjoint[h]
            out[start:start + _CHUNK, 0] = (valid & (opp > own)).sum(axis=1)
            out[start:start + _CHUNK, 1] = (valid & (opp == own)).sum(axis=1)
            out[start:start + _CHUNK, 2] = (valid & (opp < own)).sum(axis=1)
        return out

    @property
    def opponent_count(self) -> int:
        """Opponent holes compatible with a final observation."""
        used = self.spec.holes + sum(self.spec.board)
        return math.comb(self.deck_size - used, self.spec.holes)


@lru_cache(maxsize=None)
def get_hand_tables(spec: GameSpec) -> HandTables:
    return HandTables(spec)
