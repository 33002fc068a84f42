"""Limit betting rounds and the public betting tree shared by solver and evaluator."""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .core import CHANCE
from .errors import RuleError

logger = logging.getLogger(__name__)

CHECK = "check"
CALL = "call"
BET = "bet"
RAISE = "raise"
FOLD = "fold"
TOKENS = (CHECK, CALL, BET, RAISE, FOLD)

PHASE_SEPARATOR = "/"


@dataclass(frozen=True)
class BettingState:
    """Betting position after a sequence of tokens.

    Player 1 opens every phase; the state is independent of the cards dealt.
    """
    phase: int
    contributions: Tuple[int, int]
    raises: int = 0
    to_act: int = CHANCE
    folded: int = 0
    showdown: bool = False

    @property
    def terminal(self) -> bool:
        return self.folded != 0 or self.showdown

    @property
    def facing_bet(self) -> bool:
        me = self.to_act - 1
        return self.contributions[1 - me] > self.contributions[me]

    def legal_tokens(self, max_raises: int) -> Tuple[str, ...]:
        if self.terminal or self.to_act == CHANCE:
            return ()
        if self.facing_bet:
            tokens = [FOLD, CALL]
            if self.raises < max_raises:
                tokens.append(RAISE)
        else:
            tokens = [CHECK]
            if self.raises < max_raises:
                tokens.append(BET)
        return tuple(tokens)

    def deal(self) -> "BettingState":
        if self.to_act != CHANCE or self.terminal:
            raise RuleError("No deal is pending")
        return replace(self, to_act=1, raises=0)

    def apply(self, token: str, bet_size: int, max_raises: int, phases: int) -> "BettingState":
        if token not in self.legal_tokens(max_raises):
            raise RuleError(
                f"Illegal token {token!r} for player {self.to_act} in phase {self.phase}"
            )
        me = self.to_act - 1
        other = 1 - me
        chips = list(self.contributions)
        if token == FOLD:
            return replace(self, folded=self.to_act, to_act=CHANCE)
        if token in (BET, RAISE):
            chips[me] = chips[other] + bet_size
            return replace(
                self, contributions=tuple(chips), raises=self.raises + 1, to_act=other + 1
            )
        if token == CALL:
            chips[me] = chips[other]
            return self._close_round(tuple(chips), phases)
        # check: player 2 checking behind closes the round
        if self.to_act == 2:
            return self._close_round(self.contributions, phases)
        return replace(self, to_act=2)

    def _close_round(self, chips: Tuple[int, int], phases: int) -> "BettingState":
        if self.phase == phases:
            return replace(self, contributions=chips, to_act=CHANCE, showdown=True)
        return BettingState(phase=self.phase + 1, contributions=chips, to_act=CHANCE)


def initial_state(ante: int) -> BettingState:
    return BettingState(phase=1, contributions=(ante, ante), to_act=CHANCE)


DECISION = "decision"
CHANCE_NODE = "chance"
FOLD_NODE = "fold"
SHOWDOWN_NODE = "showdown"


@dataclass
class TreeNode:
    node_id: int
    kind: str
    phase: int
    key: Tuple[str, ...]
    contributions: Tuple[int, int]
    actor: int = CHANCE
    folder: int = 0
    actions: Tuple[str, ...] = ()
    children: Tuple[int, ...] = ()

    @property
    def key_text(self) -> str:
        return " ".join(self.key)


@dataclass
class BettingTree:
    """Public betting tree; node 0 is player 1's first decision after the hole deal."""
    nodes: List[TreeNode] = field(default_factory=list)
    by_key: Dict[Tuple[str, ...], int] = field(default_factory=dict)

    @classmethod
    def build(cls, ante: int, bets: Tuple[int, ...], max_raises: int) -> "BettingTree":
        tree = cls()
        phases = len(bets)
        tree._expand(initial_state(ante).deal(), (), bets, max_raises, phases)
        logger.info(
            f"Betting tree: {len(tree.nodes)} nodes, "
            f"{sum(1 for n in tree.nodes if n.kind == DECISION)} decisions"
        )
        return tree

    def _expand(
        self,
        state: BettingState,
        key: Tuple[str, ...],
        bets: Tuple[int, ...],
        max_raises: int,
        phases: int,
    ) -> int:
        node = TreeNode(
            node_id=len(self.nodes),
            kind=DECISION,
            phase=state.phase,
            key=key,
            contributions=state.contributions,
        )
        self.nodes.append(node)
        self.by_key[key] = node.node_id
        if state.folded:
            node.kind, node.folder = FOLD_NODE, state.folded
            return node.node_id
        if state.showdown:
            node.kind = SHOWDOWN_NODE
            return node.node_id
        if state.to_act == CHANCE:
            node.kind = CHANCE_NODE
            child = self._expand(state.deal(), key + (PHASE_SEPARATOR,), bets, max_raises, phases)
            node.children = (child,)
            return node.node_id
        node.actor = state.to_act
        node.actions = state.legal_tokens(max_raises)
        children = []
        for token in node.actions:
            nxt = state.apply(token, bets[state.phase - 1], max_raises, phases)
            children.append(self._expand(nxt, key + (token,), bets, max_raises, phases))
        node.children = tuple(children)
        return node.node_id

    def decisions(self, player: Optional[int] = None) -> List[TreeNode]:
        return [
            n for n in self.nodes
            if n.kind == DECISION and (player is None or n.actor == player)
        ]

    def node(self, key: Tuple[str, ...]) -> TreeNode:
        return self.nodes[self.by_key[key]]
