"""Histories, traces, signals and observation infosets of a signal observation ordered game.

Actors are integers: ``CHANCE`` (0) for nature, ``1..N`` for players. A
chance payload is a tuple of card ids dealt in one phase (the joint hole
deal at the root, then one board group per later phase); a player payload
is a betting token.
"""

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Collection, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import ComplementarityViolation, DomainError

CHANCE = 0

Payload = Union[str, Tuple[int, ...]]


@dataclass(frozen=True)
class Action:
    """One move: a betting token for players, a dealt-card tuple for chance."""
    actor: int
    payload: Payload

    def __post_init__(self):
        if self.actor < 0:
            raise DomainError(f"Invalid actor {self.actor}")
        if self.payload == "" or self.payload == ():
            raise DomainError("Action payload must be nonempty")

    @property
    def is_chance(self) -> bool:
        return self.actor == CHANCE


@dataclass(frozen=True)
class History:
    actions: Tuple[Action, ...] = ()

    @property
    def phase(self) -> int:
        """Number of chance actions taken; the empty history is phase 1."""
        return max(1, sum(1 for a in self.actions if a.is_chance))

    def __len__(self) -> int:
        return len(self.actions)

    def __add__(self, action: Action) -> "History":
        return History(self.actions + (action,))

    def chance_payloads(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(a.payload for a in self.actions if a.is_chance)

    def betting_tokens(self) -> Tuple[str, ...]:
        return tuple(a.payload for a in self.actions if not a.is_chance)


@dataclass(frozen=True)
class Wildcard:
    """Placeholder for an action hidden from a trace; remembers its owner."""
    owner: int


Slot = Union[Action, Wildcard]


@dataclass(frozen=True)
class Trace:
    slots: Tuple[Slot, ...] = ()

    def __len__(self) -> int:
        return len(self.slots)


def all_except(excluded: int, actors: Collection[int]) -> frozenset:
    """Selector keeping every actor but ``excluded``."""
    return frozenset(a for a in actors if a != excluded)


def only(actor: int) -> frozenset:
    return frozenset((actor,))


def extract_trace(h: History, keep: Collection[int]) -> Trace:
    """Keep the selected actors' actions in place; hide the rest behind wildcards."""
    keep = frozenset(keep)
    return Trace(tuple(a if a.actor in keep else Wildcard(a.actor) for a in h.actions))


def extract_sequence(h: History, keep: Collection[int]) -> Tuple[Action, ...]:
    """The selected actors' actions in order, wildcards removed."""
    return tuple(s for s in extract_trace(h, keep).slots if isinstance(s, Action))


def splice(t1: Trace, t2: Trace) -> History:
    """Rebuild a history from two complementary traces.

    Raises:
        ComplementarityViolation: lengths differ, or a position is concrete in
            both or neither trace, or a wildcard owner disagrees with the
            concrete action it stands for
    """
    if len(t1) != len(t2):
        raise ComplementarityViolation(f"Trace lengths differ: {len(t1)} vs {len(t2)}")
    out: List[Action] = []
    for pos, (s1, s2) in enumerate(zip(t1.slots, t2.slots)):
        concrete = [s for s in (s1, s2) if isinstance(s, Action)]
        if len(concrete) != 1:
            raise ComplementarityViolation(
                f"Position {pos} has {len(concrete)} concrete actions"
            )
        action = concrete[0]
        hole = s2 if action is s1 else s1
        if hole.owner != action.actor:
            raise ComplementarityViolation(
                f"Position {pos}: wildcard owner {hole.owner} vs actor {action.actor}"
            )
        out.append(action)
    return History(tuple(out))


@dataclass(frozen=True)
class Signal:
    """Cards dealt so far, one tuple per phase (joint holes first)."""
    deals: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        cards = [c for deal in self.deals for c in deal]
        if len(set(cards)) != len(cards):
            raise DomainError(f"Signal deals overlap: {self.deals}")

    @property
    def phase(self) -> int:
        return max(1, len(self.deals))

    def holes(self, player: int, per_player: int) -> Tuple[int, ...]:
        start = (player - 1) * per_player
        return tuple(self.deals[0][start:start + per_player])

    def board(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(self.deals[1:])


@dataclass(frozen=True)
class ObservationInfoset:
    """One player's view of a signal: own hole cards plus the board so far."""
    owner: int
    own_cards: Tuple[int, ...]
    board: Tuple[Tuple[int, ...], ...] = ()
    phase: int = field(default=0)

    def __post_init__(self):
        if self.phase == 0:
            object.__setattr__(self, "phase", 1 + len(self.board))
        if self.phase != 1 + len(self.board):
            raise DomainError(f"Phase {self.phase} does not match {len(self.board)} board groups")
        public = [c for group in self.board for c in group]
        cards = list(self.own_cards) + public
        if len(set(cards)) != len(cards):
            raise DomainError(f"Own cards {self.own_cards} overlap board {self.board}")

    def cards(self) -> Tuple[int, ...]:
        """Hole cards then board groups, each group ascending."""
        out = list(sorted(self.own_cards))
        for group in self.board:
            out.extend(sorted(group))
        return tuple(out)


@dataclass(frozen=True)
class CanonicalIndex:
    phase: int
    index: int


def observe(signal: Signal, player: int, per_player: int) -> ObservationInfoset:
    return ObservationInfoset(
        owner=player,
        own_cards=tuple(sorted(signal.holes(player, per_player))),
        board=tuple(tuple(sorted(g)) for g in signal.board()),
    )


@dataclass(frozen=True)
class ChanceModel:
    """Uniform dealing: every legal next deal is equally likely.

    Weights are exact fractions derived from combinatorial counts.
    """
    deck_size: int
    holes: int
    board: Tuple[int, ...]
    players: int = 2

    def deal_count(self, phase: int) -> int:
        """Number of distinct chance actions that open ``phase``."""
        if phase == 1:
            total, remaining = 1, self.deck_size
            for _ in range(self.players):
                total *= math.comb(remaining, self.holes)
                remaining -= self.holes
            return total
        used = self.players * self.holes + sum(self.board[:phase - 1])
        return math.comb(self.deck_size - used, self.board[phase - 1])

    def is_legal_deal(self, theta: Signal, deal: Tuple[int, ...]) -> bool:
        phase = len(theta.deals) + 1
        if phase > len(self.board):
            return False
        size = self.players * self.holes if phase == 1 else self.board[phase - 1]
        used = {c for d in theta.deals for c in d}
        return (
            len(deal) == size
            and len(set(deal)) == size
            and all(0 <= c < self.deck_size and c not in used for c in deal)
        )

    def transition_weight(self, theta: Signal, theta_next: Signal) -> Fraction:
        if theta_next.deals[:-1] != theta.deals or len(theta_next.deals) != len(theta.deals) + 1:
            return Fraction(0)
        if not self.is_legal_deal(theta, theta_next.deals[-1]):
            return Fraction(0)
        return Fraction(1, self.deal_count(len(theta_next.deals)))

    def reach_weight(self, theta: Signal) -> Fraction:
        weight = Fraction(1)
        for r in range(1, len(theta.deals) + 1):
            weight *= self.transition_weight(Signal(theta.deals[:r - 1]), Signal(theta.deals[:r]))
        return weight

    def iter_deals(self, theta: Signal) -> Iterator[Tuple[int, ...]]:
        """Every legal next chance payload, holes sorted within each player."""
        phase = len(theta.deals) + 1
        used = {c for d in theta.deals for c in d}
        free = [c for c in range(self.deck_size) if c not in used]
        if phase == 1:
            yield from self._hole_deals(free, self.players)
            return
        for combo in itertools.combinations(free, self.board[phase - 1]):
            yield combo

    def _hole_deals(self, free: Sequence[int], players: int) -> Iterator[Tuple[int, ...]]:
        if players == 0:
            yield ()
            return
        for combo in itertools.combinations(free, self.holes):
            rest = [c for c in free if c not in combo]
            for tail in self._hole_deals(rest, players - 1):
                yield combo + tail

    def iter_signals(self, phase: Optional[int] = None) -> Iterator[Signal]:
        """All signals with ``phase`` deals (defaults to full-length signals)."""
        phase = len(self.board) if phase is None else phase

        def extend(theta: Signal) -> Iterator[Signal]:
            if len(theta.deals) == phase:
                yield theta
                return
            for deal in self.iter_deals(theta):
                yield from extend(Signal(theta.deals + (deal,)))

        yield from extend(Signal(()))
