"""Game registry and rules engine for Leduc, Numeral211 and the HULH card layer."""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, List, Literal, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .betting import BettingState, BettingTree, PHASE_SEPARATOR, initial_state
from .cards import Deck
from .core import CHANCE, Action, ChanceModel, History, ObservationInfoset, Signal, observe
from .errors import ConfigError, DomainError, PhaseError, RuleError
from .hand_eval import EVALUATORS, HandEvaluator, HandRank

logger = logging.getLogger(__name__)

PLAYERS = (1, 2)


class GameSpec(BaseModel):
    """Rules of a two-player limit hold'em-style game."""

    model_config = ConfigDict(frozen=True)

    game_id: str
    ranks: str
    suits: str
    holes: int = Field(..., ge=1, description="Hole cards per player")
    board: Tuple[int, ...] = Field(..., description="Board cards dealt when each phase opens")
    ante: int = Field(..., gt=0)
    bets: Tuple[int, ...] = Field(..., description="Fixed bet size per phase")
    max_raises: int = Field(..., ge=1, description="Bets plus raises allowed per phase")
    evaluator: Literal["leduc", "best3", "best5"]
    symmetry: Literal["suits", "cards"] = Field(
        "suits",
        description="'cards' when hand strength ignores suits and any same-rank swap is lossless",
    )
    betting: bool = True

    @model_validator(mode="after")
    def _check_rules(self) -> "GameSpec":
        if len(self.board) < 2:
            raise ValueError("A game needs at least two phases")
        if self.board[0] != 0:
            raise ValueError("Phase 1 deals hole cards only")
        if len(self.bets) != len(self.board):
            raise ValueError("One bet size per phase is required")
        if any(b <= 0 for b in self.bets):
            raise ValueError("Bet sizes must be positive")
        if 2 * self.holes + sum(self.board) > len(self.ranks) * len(self.suits):
            raise ValueError("Deck too small for the deal")
        return self

    @property
    def deck(self) -> Deck:
        return Deck(self.ranks, self.suits)

    @property
    def phases(self) -> int:
        return len(self.board)

    def used_cards(self, phase: int) -> int:
        """Cards one player observes at ``phase``: own holes plus the board."""
        return self.holes + sum(self.board[:phase])

    @property
    def chance(self) -> ChanceModel:
        return ChanceModel(self.deck.size, self.holes, self.board)

    def with_overrides(self, overrides: Mapping[str, Union[str, int]]) -> "GameSpec":
        """Apply ``holes``, ``ante``, ``bet.phase1``, ``bet.postflop`` or ``max_raises``."""
        data = self.model_dump()
        bets = list(self.bets)
        for key, raw in overrides.items():
            try:
                value = int(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"Game override {key}={raw!r} is not an integer")
            if key == "holes":
                data["holes"] = value
            elif key == "ante":
                data["ante"] = value
            elif key == "bet.phase1":
                bets[0] = value
            elif key == "bet.postflop":
                bets[1:] = [value] * (len(bets) - 1)
            elif key == "max_raises":
                data["max_raises"] = value
            else:
                raise ConfigError(f"Unknown game override: {key}")
        data["bets"] = tuple(bets)
        try:
            return GameSpec(**data)
        except ValueError as e:
            raise ConfigError(f"Invalid game overrides {dict(overrides)}: {e}")


LEDUC = GameSpec(
    game_id="leduc",
    ranks="JQK",
    suits="hs",
    holes=1,
    board=(0, 1),
    ante=1,
    bets=(2, 2),
    max_raises=2,
    evaluator="leduc",
    symmetry="cards",
)

NUMERAL211 = GameSpec(
    game_id="numeral211",
    ranks="A23456789T",
    suits="shdc",
    holes=2,
    board=(0, 1, 1),
    ante=5,
    bets=(10, 20, 20),
    max_raises=4,
    evaluator="best3",
)

# Card layer only: the chip fields describe blinds and limits but are never played.
HULH_CARDS = GameSpec(
    game_id="hulh-cards",
    ranks="23456789TJQKA",
    suits="shdc",
    holes=2,
    board=(0, 3, 1, 1),
    ante=1,
    bets=(2, 2, 4, 4),
    max_raises=4,
    evaluator="best5",
    betting=False,
)

GAMES: Dict[str, GameSpec] = {g.game_id: g for g in (LEDUC, NUMERAL211, HULH_CARDS)}


def get_game(game_id: str, overrides: Optional[Mapping[str, Union[str, int]]] = None) -> GameSpec:
    if game_id not in GAMES:
        raise DomainError(f"Unknown game {game_id!r}; choose from {sorted(GAMES)}")
    spec = GAMES[game_id]
    return spec.with_overrides(overrides) if overrides else spec


@lru_cache(maxsize=None)
def get_evaluator(spec: GameSpec) -> HandEvaluator:
    return EVALUATORS[spec.evaluator](spec.deck, spec.holes)


@lru_cache(maxsize=None)
def get_tree(spec: GameSpec) -> BettingTree:
    _require_betting(spec)
    return BettingTree.build(spec.ante, spec.bets, spec.max_raises)


def evaluate_hand(cards, spec: GameSpec, board=()) -> HandRank:
    """Best hand formed by ``cards`` (hole or full hand) and ``board``.

    Raises:
        DomainError: wrong card count, duplicates or cards outside the deck
    """
    return get_evaluator(spec).evaluate(cards, board)


@dataclass(frozen=True)
class ShowdownOrder:
    """Total preorder over players induced by a final-phase signal."""
    ranks: Tuple[HandRank, ...]

    def precedes(self, i: int, j: int) -> bool:
        """True when player ``i`` ranks no higher than player ``j``."""
        return self.ranks[i - 1] <= self.ranks[j - 1]


def showdown_order(theta: Signal, spec: GameSpec) -> ShowdownOrder:
    if len(theta.deals) != spec.phases:
        raise PhaseError(f"Showdown needs a phase-{spec.phases} signal, got {len(theta.deals)} deals")
    board = [c for group in theta.board() for c in group]
    return ShowdownOrder(tuple(
        evaluate_hand(theta.holes(p, spec.holes), spec, board) for p in PLAYERS
    ))


@dataclass(frozen=True)
class TerminalPayoff:
    utilities: Tuple[int, int]
    survival: Tuple[int, int]


def _require_betting(spec: GameSpec) -> None:
    if not spec.betting:
        raise RuleError(f"{spec.game_id} registers the card layer only; betting is unavailable")


def replay(spec: GameSpec, h: History) -> Tuple[BettingState, Signal]:
    """Validate ``h`` from the root, returning its betting state and signal."""
    _require_betting(spec)
    state = initial_state(spec.ante)
    theta = Signal(())
    chance = spec.chance
    for a in h.actions:
        if state.terminal:
            raise RuleError("Action after a terminal history")
        if a.is_chance:
            if state.to_act != CHANCE:
                raise RuleError(f"Chance acted while player {state.to_act} was to act")
            if not chance.is_legal_deal(theta, tuple(a.payload)):
                raise RuleError(f"Illegal deal {a.payload} after {theta.deals}")
            theta = Signal(theta.deals + (tuple(a.payload),))
            state = state.deal()
        else:
            if a.actor != state.to_act:
                raise RuleError(f"Player {a.actor} acted out of turn")
            state = state.apply(a.payload, spec.bets[state.phase - 1], spec.max_raises, spec.phases)
    return state, theta


def next_actor(spec: GameSpec, h: History) -> Optional[int]:
    """Actor to move at ``h``: ``CHANCE``, a player, or None when terminal."""
    state, _ = replay(spec, h)
    return None if state.terminal else state.to_act


def legal_actions(spec: GameSpec, h: History) -> List[Action]:
    state, _ = replay(spec, h)
    if state.terminal:
        return []
    if state.to_act == CHANCE:
        raise RuleError("Chance node: use iter_deals for chance actions")
    return [Action(state.to_act, t) for t in state.legal_tokens(spec.max_raises)]


def iter_deals(spec: GameSpec, h: History) -> Iterator[Action]:
    state, theta = replay(spec, h)
    if state.to_act != CHANCE or state.terminal:
        raise RuleError("Not a chance node")
    for deal in spec.chance.iter_deals(theta):
        yield Action(CHANCE, deal)


def payoff(spec: GameSpec, state: BettingState, theta: Signal) -> TerminalPayoff:
    c1, c2 = state.contributions
    if state.folded:
        lost = state.contributions[state.folded - 1]
        utilities = (-lost, lost) if state.folded == 1 else (lost, -lost)
        survival = (0, 1) if state.folded == 1 else (1, 0)
        return TerminalPayoff(utilities, survival)
    order = showdown_order(theta, spec)
    if order.precedes(1, 2) and order.precedes(2, 1):
        return TerminalPayoff((0, 0), (1, 1))
    if order.precedes(2, 1):
        return TerminalPayoff((c2, -c2), (1, 1))
    return TerminalPayoff((-c1, c1), (1, 1))


def game_step(spec: GameSpec, h: History, a: Action) -> Union[History, TerminalPayoff]:
    """Append ``a`` to ``h``; return the payoff instead when the game ends.

    Raises:
        RuleError: ``a`` is not legal at ``h``
    """
    nxt = h + a
    state, theta = replay(spec, nxt)
    if state.terminal:
        return payoff(spec, state, theta)
    return nxt


def iter_histories(spec: GameSpec, root: Optional[History] = None) -> Iterator[Tuple[History, Optional[TerminalPayoff]]]:
    """Depth-first walk over every history; terminal ones carry their payoff."""
    h = root or History()
    state, theta = replay(spec, h)
    if state.terminal:
        yield h, payoff(spec, state, theta)
        return
    yield h, None
    if state.to_act == CHANCE:
        moves = (Action(CHANCE, d) for d in spec.chance.iter_deals(theta))
    else:
        moves = (Action(state.to_act, t) for t in state.legal_tokens(spec.max_raises))
    for a in moves:
        yield from iter_histories(spec, h + a)


def iter_terminals(spec: GameSpec) -> Iterator[Tuple[History, TerminalPayoff]]:
    for h, result in iter_histories(spec):
        if result is not None:
            yield h, result


def betting_key(h: History) -> Tuple[str, ...]:
    """Public-tree key of a decision history: tokens with a separator per later deal."""
    key: List[str] = []
    seen_deal = False
    for a in h.actions:
        if a.is_chance:
            if seen_deal:
                key.append(PHASE_SEPARATOR)
            seen_deal = True
        else:
            key.append(a.payload)
    return tuple(key)


def observation(spec: GameSpec, h: History, player: int) -> ObservationInfoset:
    return observe(Signal(h.chance_payloads()), player, spec.holes)


def separable_completion(spec: GameSpec, h1: History, h2: History, h1p: History) -> Optional[History]:
    """Given matching premises, build h2' with h2's deals on h1''s betting trace.

    Returns the spliced history when it is legal, None when no such history
    exists. Premises: h1 and h1' deal identical cards; h1 and h2 share the
    non-chance trace.
    """
    if h1.chance_payloads() != h1p.chance_payloads():
        raise DomainError("h1 and h1' must share their chance sequence")
    if [(a.actor, a.payload) if not a.is_chance else CHANCE for a in h1.actions] != [
        (a.actor, a.payload) if not a.is_chance else CHANCE for a in h2.actions
    ]:
        raise DomainError("h1 and h2 must share their non-chance trace")
    deals = iter(h2.chance_payloads())
    actions = []
    for a in h1p.actions:
        if a.is_chance:
            payload = next(deals, None)
            if payload is None:
                return None
            actions.append(Action(CHANCE, payload))
        else:
            actions.append(a)
    candidate = History(tuple(actions))
    try:
        replay(spec, candidate)
    except RuleError:
        return None
    return candidate
