"""Abstracted games over the public betting tree and a vectorized CFR solver.

Every array below is indexed ``[board, hole]`` for the public boards of a
node's phase (see ``hands.HandTables``). An abstracted infoset is a
(decision node, bucket) pair, so two original infosets merge exactly when
they share the betting sequence and the owner's bucket.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import trange

from .abstraction import AbstractionMap, build_li
from .betting import CHANCE_NODE, DECISION, FOLD_NODE, SHOWDOWN_NODE, BettingTree, TreeNode
from .errors import DomainError, ParameterError, ValidationError
from .games import PLAYERS, GameSpec, get_tree
from .hands import HandTables, get_hand_tables
from .indexing import get_index

logger = logging.getLogger(__name__)

VARIANTS = ("vanilla", "plus")

# Above this many final-phase raw observations the unabstracted side uses LI.
RAW_IDENTITY_LIMIT = 100_000


def map_label(amap: Optional[AbstractionMap]) -> str:
    return "none" if amap is None else amap.algorithm


@dataclass(frozen=True)
class AbstractionProfile:
    """One abstraction map per player; None keeps raw observations."""
    spec: GameSpec
    maps: Tuple[Optional[AbstractionMap], Optional[AbstractionMap]]

    def __post_init__(self):
        if len(self.maps) != 2:
            raise DomainError("A profile holds exactly two maps")
        for player, amap in zip(PLAYERS, self.maps):
            if amap is None:
                continue
            if amap.game_id != self.spec.game_id:
                raise DomainError(
                    f"Player {player} map is for {amap.game_id}, not {self.spec.game_id}"
                )
            if amap.phases != self.spec.phases:
                raise DomainError(f"Player {player} map covers {amap.phases} of {self.spec.phases} phases")
            for phase, buckets in enumerate(amap.buckets, start=1):
                if buckets.shape[0] != get_index(self.spec, phase).canonical_count:
                    raise DomainError(f"Player {player} phase {phase} map has the wrong length")

    def map_for(self, player: int) -> Optional[AbstractionMap]:
        return self.maps[player - 1]

    @property
    def labels(self) -> Tuple[str, str]:
        return tuple(map_label(m) for m in self.maps)


def unabstracted_map(spec: GameSpec, mode: str = "auto") -> Optional[AbstractionMap]:
    """Map for the side of an asymmetric profile that keeps full information.

    ``auto`` keeps raw observations on small games and falls back to the
    lossless LI map when raw tables get large.
    """
    if mode == "none":
        return None
    if mode == "li":
        return build_li(spec)
    if mode != "auto":
        raise ParameterError(f"Unknown unabstracted mode {mode!r}")
    if get_index(spec, spec.phases).raw_count <= RAW_IDENTITY_LIMIT:
        return None
    return build_li(spec)


def bucket_table(spec: GameSpec, amap: Optional[AbstractionMap], phase: int) -> np.ndarray:
    """(boards, holes) bucket of every observation; 0 where hole and board collide."""
    tables = get_hand_tables(spec)
    index = get_index(spec, phase)
    valid = tables.valid[phase - 1].ravel()
    raw = index.raw_rank(tables.observation_cards(phase)[valid])
    out = np.zeros(valid.shape[0], dtype=np.int64)
    if amap is None:
        out[valid] = raw
    else:
        out[valid] = amap.buckets[phase - 1][index.raw_to_canonical[raw]]
    return out.reshape(tables.valid[phase - 1].shape)


@dataclass(frozen=True)
class AbstractedInfoset:
    owner: int
    key: Tuple[str, ...]
    bucket: int
    phase: int


class AbstractedGame:
    """Public betting tree plus each player's bucket tables."""

    def __init__(self, profile: AbstractionProfile):
        self.profile = profile
        self.spec = profile.spec
        self.tree: BettingTree = get_tree(self.spec)
        self.tables: HandTables = get_hand_tables(self.spec)
        self.buckets: List[List[np.ndarray]] = []
        self.bucket_counts: List[List[int]] = []
        for player in PLAYERS:
            amap = profile.map_for(player)
            self.buckets.append([bucket_table(self.spec, amap, r) for r in range(1, self.spec.phases + 1)])
            self.bucket_counts.append([
                get_index(self.spec, r).raw_count if amap is None else amap.bucket_count(r)
                for r in range(1, self.spec.phases + 1)
            ])
        logger.info(f"Abstracted {self.spec.game_id} game for profile {profile.labels}: "
                    f"buckets {self.bucket_counts}")

    def node_buckets(self, node: TreeNode) -> np.ndarray:
        return self.buckets[node.actor - 1][node.phase - 1]

    def node_bucket_count(self, node: TreeNode) -> int:
        return self.bucket_counts[node.actor - 1][node.phase - 1]

    def infoset_counts(self, player: int) -> Tuple[int, ...]:
        """Abstracted infosets of ``player`` per phase."""
        counts = [0] * self.spec.phases
        for node in self.tree.decisions(player):
            counts[node.phase - 1] += self.node_bucket_count(node)
        return tuple(counts)

    def abstracted_infosets(self, player: Optional[int] = None) -> Iterator[AbstractedInfoset]:
        for node in self.tree.decisions(player):
            for bucket in range(self.node_bucket_count(node)):
                yield AbstractedInfoset(node.actor, node.key, bucket, node.phase)

    def infoset_of(self, node: TreeNode, board: int, hole: int) -> AbstractedInfoset:
        """Abstracted infoset holding the original infoset at (node, board, hole)."""
        if node.kind != DECISION:
            raise DomainError(f"Node {node.key_text!r} is not a decision node")
        if not self.tables.valid[node.phase - 1][board, hole]:
            raise DomainError("Hole and board share a card")
        return AbstractedInfoset(node.actor, node.key, int(self.node_buckets(node)[board, hole]), node.phase)


def build_abstracted_game(
    spec: GameSpec, maps: Sequence[Optional[AbstractionMap]]
) -> AbstractedGame:
    """Raises DomainError when a map does not belong to ``spec``."""
    return AbstractedGame(AbstractionProfile(spec, tuple(maps)))


def regret_matching(regrets: np.ndarray) -> np.ndarray:
    positive = np.maximum(regrets, 0.0)
    total = positive.sum(axis=1, keepdims=True)
    uniform = np.full_like(positive, 1.0 / positive.shape[1])
    return np.where(total > 0, positive / np.where(total > 0, total, 1.0), uniform)


def normalize_rows(weights: np.ndarray) -> np.ndarray:
    return regret_matching(weights)


@dataclass
class StrategyProfile:
    """Per decision node, a (buckets, actions) distribution for the node's actor."""
    profile: AbstractionProfile
    policies: Dict[int, np.ndarray]
    iteration: int = 0

    def check(self, atol: float = 1e-9) -> None:
        tree = get_tree(self.profile.spec)
        for node in tree.decisions():
            probs = self.policies.get(node.node_id)
            if probs is None:
                raise ValidationError(f"No strategy at {node.key_text!r}")
            if probs.shape[1] != len(node.actions):
                raise ValidationError(f"Action count mismatch at {node.key_text!r}")
            if (probs < -atol).any() or not np.allclose(probs.sum(axis=1), 1.0, atol=atol):
                raise ValidationError(f"Strategy at {node.key_text!r} is not normalized")

    def action_probabilities(self, infoset: AbstractedInfoset) -> np.ndarray:
        node = get_tree(self.profile.spec).node(infoset.key)
        return self.policies[node.node_id][infoset.bucket]

    @classmethod
    def combine(cls, first: "StrategyProfile", second: "StrategyProfile") -> "StrategyProfile":
        """Player 1 from ``first``, player 2 from ``second``."""
        spec = first.profile.spec
        if second.profile.spec != spec:
            raise DomainError("Strategies belong to different games")
        tree = get_tree(spec)
        policies = {
            n.node_id: (first if n.actor == 1 else second).policies[n.node_id]
            for n in tree.decisions()
        }
        profile = AbstractionProfile(spec, (first.profile.maps[0], second.profile.maps[1]))
        return cls(profile, policies, min(first.iteration, second.iteration))


@dataclass
class RegretTable:
    regrets: Dict[int, np.ndarray] = field(default_factory=dict)
    strategy_sum: Dict[int, np.ndarray] = field(default_factory=dict)


Checkpoint = Callable[[int, StrategyProfile], None]


class CFRSolver:
    """Counterfactual regret minimization over all boards and holes at once.

    ``vanilla`` updates both players from one traversal and averages
    uniformly; ``plus`` alternates players, floors regrets at zero and
    weights iteration t by t in the average.
    """

    def __init__(self, game: AbstractedGame, variant: str = "vanilla"):
        if variant not in VARIANTS:
            raise ParameterError(f"Unknown CFR variant {variant!r}; choose from {VARIANTS}")
        self.game = game
        self.variant = variant
        self.tree = game.tree
        self.tables = game.tables
        self.table = RegretTable()
        for node in self.tree.decisions():
            shape = (game.node_bucket_count(node), len(node.actions))
            self.table.regrets[node.node_id] = np.zeros(shape)
            self.table.strategy_sum[node.node_id] = np.zeros(shape)
        self.iteration = 0

    def current_strategy(self, node_id: int) -> np.ndarray:
        return regret_matching(self.table.regrets[node_id])

    def average_strategy(self) -> StrategyProfile:
        policies = {n: normalize_rows(s) for n, s in self.table.strategy_sum.items()}
        return StrategyProfile(self.game.profile, policies, self.iteration)

    def root_reach(self) -> List[np.ndarray]:
        return [self.tables.valid[0].astype(float) for _ in PLAYERS]

    def iterate(self) -> None:
        self.iteration += 1
        if self.variant == "vanilla":
            self._walk(self.tree.nodes[0], self.root_reach(), PLAYERS, 1.0)
        else:
            for player in PLAYERS:
                self._walk(self.tree.nodes[0], self.root_reach(), (player,), float(self.iteration))

    def solve(self, iterations: int, checkpoint_every: int = 0,
              checkpoint: Optional[Checkpoint] = None) -> StrategyProfile:
        if iterations < 1:
            raise ParameterError("At least one CFR iteration is required")
        for _ in trange(iterations, desc=f"CFR {self.variant}", leave=False):
            self.iterate()
            if checkpoint and checkpoint_every and self.iteration % checkpoint_every == 0:
                checkpoint(self.iteration, self.average_strategy())
        if checkpoint and (not checkpoint_every or self.iteration % checkpoint_every):
            checkpoint(self.iteration, self.average_strategy())
        return self.average_strategy()

    def _walk(self, node: TreeNode, reach: List[np.ndarray],
              update: Tuple[int, ...], weight: float) -> List[np.ndarray]:
        if node.kind in (FOLD_NODE, SHOWDOWN_NODE):
            return terminal_values(self.tables, node, reach)
        if node.kind == CHANCE_NODE:
            child = self.tree.nodes[node.children[0]]
            values = self._walk(child, deal_reach(self.tables, node.phase, reach), update, weight)
            return [collect_deal(self.tables, node.phase, v) for v in values]

        me = node.actor - 1
        buckets = self.game.node_buckets(node)
        sigma = self.current_strategy(node.node_id)[buckets]
        child_values = []
        for i, child_id in enumerate(node.children):
            child_reach = list(reach)
            child_reach[me] = reach[me] * sigma[..., i]
            child_values.append(self._walk(self.tree.nodes[child_id], child_reach, update, weight))
        mine = np.stack([v[me] for v in child_values], axis=-1)
        value = (sigma * mine).sum(axis=-1)
        other = sum(v[1 - me] for v in child_values)

        if node.actor in update:
            k = self.game.node_bucket_count(node)
            flat = buckets.ravel()
            regrets = self.table.regrets[node.node_id]
            avg = self.table.strategy_sum[node.node_id]
            for i in range(len(node.actions)):
                gain = np.bincount(flat, weights=(mine[..., i] - value).ravel(), minlength=k)
                avg[:, i] += weight * np.bincount(flat, weights=(reach[me] * sigma[..., i]).ravel(), minlength=k)
                regrets[:, i] += gain
            if self.variant == "plus":
                np.maximum(regrets, 0.0, out=regrets)

        out = [None, None]
        out[me], out[1 - me] = value, other
        return out


def terminal_value(tables: HandTables, node: TreeNode, player: int, opponent_reach: np.ndarray) -> np.ndarray:
    """Counterfactual value of ``player`` at a fold or showdown node."""
    if node.kind == SHOWDOWN_NODE:
        return node.contributions[0] * tables.showdown_margin(opponent_reach)
    sign = -1.0 if player == node.folder else 1.0
    lost = node.contributions[node.folder - 1]
    return sign * lost * tables.disjoint_reach(opponent_reach, node.phase)


def terminal_values(tables: HandTables, node: TreeNode, reach: List[np.ndarray]) -> List[np.ndarray]:
    return [terminal_value(tables, node, p, reach[2 - p]) for p in PLAYERS]


def deal_reach(tables: HandTables, phase: int, reach: List[np.ndarray]) -> List[np.ndarray]:
    """Reach after the deal opening ``phase``; each board splits into its children."""
    fanout = tables.board_fanout[phase - 1]
    valid = tables.valid[phase - 1]
    return [np.repeat(r, fanout, axis=0) * valid for r in reach]


def collect_deal(tables: HandTables, phase: int, values: np.ndarray) -> np.ndarray:
    fanout = tables.board_fanout[phase - 1]
    boards = values.shape[0] // fanout
    summed = values.reshape(boards, fanout, values.shape[1]).sum(axis=1)
    return summed / tables.chance_count(phase)


def cfr_solve(
    game: AbstractedGame,
    iterations: int,
    variant: str = "vanilla",
    checkpoint_every: int = 0,
    checkpoint: Optional[Checkpoint] = None,
) -> StrategyProfile:
    """Average strategy after ``iterations`` CFR iterations.

    ``checkpoint`` receives the running average every ``checkpoint_every``
    iterations and once more at the end if the last iteration is off-grid.
    """
    return CFRSolver(game, variant).solve(iterations, checkpoint_every, checkpoint)


class LiftedProfile:
    """A strategy profile read back onto the original game's infosets.

    Policies are expanded per decision node on request; every original
    infoset in one abstracted infoset gets the same distribution.
    """

    def __init__(self, sigma: StrategyProfile):
        self.sigma = sigma
        self.game = AbstractedGame(sigma.profile)
        self.tree = self.game.tree

    def policy(self, node_id: int) -> np.ndarray:
        """(boards, holes, actions) distribution at a decision node."""
        node = self.tree.nodes[node_id]
        return self.sigma.policies[node_id][self.game.node_buckets(node)]

    def action_probabilities(self, key: Tuple[str, ...], board: int, hole: int) -> np.ndarray:
        node = self.tree.node(key)
        return self.sigma.action_probabilities(self.game.infoset_of(node, board, hole))


def lift_strategy(sigma: StrategyProfile) -> LiftedProfile:
    return LiftedProfile(sigma)
