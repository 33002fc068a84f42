"""Best response, exploitability and the experiment curve harnesses."""

import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from tqdm import trange

from .abstraction import AbstractionMap
from .betting import CALL, CHECK, FOLD, CHANCE_NODE, FOLD_NODE, SHOWDOWN_NODE, BettingTree, TreeNode
from .cards import combination_rank
from .core import CHANCE, Action, History
from .errors import InvariantViolation, ParameterError, ValidationError
from .games import GameSpec, betting_key, get_tree, observation, payoff, replay
from .hands import HandTables, get_hand_tables
from .solver import (
    AbstractedGame,
    AbstractionProfile,
    CFRSolver,
    StrategyProfile,
    collect_deal,
    deal_reach,
    lift_strategy,
    map_label,
    terminal_value,
    unabstracted_map,
)

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-6
SCENARIOS = ("asymmetric", "symmetric")
GAME_VALUE_ITERATIONS = 3000


class Policy(Protocol):
    def policy(self, node_id: int) -> np.ndarray:
        """(boards, holes, actions) distribution at a decision node."""
        ...


class FixedPolicy:
    """One action distribution per decision node, shared by every hand."""

    def __init__(self, spec: GameSpec, chooser: Callable[[TreeNode], np.ndarray]):
        self.tree = get_tree(spec)
        self.tables = get_hand_tables(spec)
        self.chooser = chooser

    def policy(self, node_id: int) -> np.ndarray:
        node = self.tree.nodes[node_id]
        probs = np.asarray(self.chooser(node), dtype=float)
        shape = self.tables.valid[node.phase - 1].shape + (len(node.actions),)
        return np.broadcast_to(probs, shape)


def uniform_policy(spec: GameSpec) -> FixedPolicy:
    return FixedPolicy(spec, lambda node: np.full(len(node.actions), 1.0 / len(node.actions)))


def _pure(preferred: Sequence[str]) -> Callable[[TreeNode], np.ndarray]:
    def choose(node: TreeNode) -> np.ndarray:
        probs = np.zeros(len(node.actions))
        for token in preferred:
            if token in node.actions:
                probs[node.actions.index(token)] = 1.0
                return probs
        raise ParameterError(f"No preferred action among {node.actions}")
    return choose


def always_call_policy(spec: GameSpec) -> FixedPolicy:
    """Call any bet, check otherwise."""
    return FixedPolicy(spec, _pure((CALL, CHECK)))


def always_fold_policy(spec: GameSpec) -> FixedPolicy:
    """Fold to any bet, check otherwise."""
    return FixedPolicy(spec, _pure((FOLD, CHECK)))


@dataclass
class ExploitabilityReport:
    """Exploitability in chips per hand plus the values it was derived from."""
    eps1: float
    eps2: float
    eps: float
    br1: float
    br2: float
    u1: float
    reference: float
    value_source: str = "solved"
    iteration: int = 0
    abstractions: Tuple[str, str] = ("none", "none")
    ante: int = 1

    @property
    def eps_milliante(self) -> float:
        return 1000.0 * self.eps / self.ante

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["abstractions"] = list(self.abstractions)
        data["eps_milliante"] = self.eps_milliante
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ExploitabilityReport":
        data = dict(data)
        data.pop("eps_milliante", None)
        data["abstractions"] = tuple(data.get("abstractions", ("none", "none")))
        return cls(**data)


class _Walker:
    """Backward induction over the public tree for one player's values."""

    def __init__(self, spec: GameSpec, player: int, own: Optional[Policy], other: Policy):
        self.tree: BettingTree = get_tree(spec)
        self.tables: HandTables = get_hand_tables(spec)
        self.player = player
        self.own = own
        self.other = other

    def run(self) -> float:
        reach = self.tables.valid[0].astype(float)
        values = self._walk(self.tree.nodes[0], reach)
        return float(values.sum() / self.tables.hole_pair_count)

    def _checked(self, policy: Policy, node: TreeNode) -> np.ndarray:
        probs = np.asarray(policy.policy(node.node_id))
        valid = self.tables.valid[node.phase - 1]
        if probs.shape != valid.shape + (len(node.actions),):
            raise ValidationError(f"Policy at {node.key_text!r} has shape {probs.shape}")
        live = probs[valid]
        if (live < -NORMALIZATION_TOLERANCE).any() or not np.allclose(
            live.sum(axis=-1), 1.0, atol=NORMALIZATION_TOLERANCE
        ):
            raise ValidationError(f"Policy at {node.key_text!r} is not normalized")
        return probs

    def _walk(self, node: TreeNode, reach: np.ndarray) -> np.ndarray:
        if node.kind in (FOLD_NODE, SHOWDOWN_NODE):
            return terminal_value(self.tables, node, self.player, reach)
        if node.kind == CHANCE_NODE:
            child = self.tree.nodes[node.children[0]]
            (dealt,) = deal_reach(self.tables, node.phase, [reach])
            return collect_deal(self.tables, node.phase, self._walk(child, dealt))
        children = [self.tree.nodes[c] for c in node.children]
        if node.actor == self.player:
            values = np.stack([self._walk(c, reach) for c in children], axis=-1)
            if self.own is None:
                return values.max(axis=-1)
            return (self._checked(self.own, node) * values).sum(axis=-1)
        probs = self._checked(self.other, node)
        return sum(self._walk(c, reach * probs[..., i]) for i, c in enumerate(children))


def best_response_value(spec: GameSpec, fixed: Policy, responder: int) -> float:
    """Responder's best value against ``fixed`` (used at the other player's nodes only).

    Raises:
        ValidationError: ``fixed`` is not a normalized distribution somewhere
    """
    return _Walker(spec, responder, None, fixed).run()


def profile_value(spec: GameSpec, first: Policy, second: Policy) -> float:
    """Expected chips per hand for player 1 when 1 plays ``first`` and 2 plays ``second``."""
    return _Walker(spec, 1, first, second).run()


@dataclass(frozen=True)
class GameValue:
    """Player 1's game value bracketed by a lossless CFR+ solve.

    The solved profile guarantees ``lower = -br2`` to player 1 and concedes at
    most ``upper = br1``, so the midpoint is within ``gap`` of the true value.
    """
    game_id: str
    iterations: int
    lower: float
    upper: float

    @property
    def value(self) -> float:
        return (self.lower + self.upper) / 2

    @property
    def gap(self) -> float:
        return (self.upper - self.lower) / 2

    def to_dict(self) -> Dict:
        data = asdict(self)
        data.update(value=self.value, gap=self.gap)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "GameValue":
        return cls(data["game_id"], int(data["iterations"]), float(data["lower"]), float(data["upper"]))


def solve_game_value(spec: GameSpec, iterations: int = GAME_VALUE_ITERATIONS) -> GameValue:
    """Solve the unabstracted game with CFR+ and bracket its value."""
    if iterations < 1:
        raise ParameterError("At least one CFR iteration is required")
    full = unabstracted_map(spec)
    solver = CFRSolver(AbstractedGame(AbstractionProfile(spec, (full, full))), "plus")
    for _ in trange(iterations, desc=f"game value {spec.game_id}", leave=False):
        solver.iterate()
    lifted = lift_strategy(solver.average_strategy())
    result = GameValue(
        spec.game_id,
        iterations,
        lower=-best_response_value(spec, lifted, 2),
        upper=best_response_value(spec, lifted, 1),
    )
    if result.gap < -1e-9:
        raise InvariantViolation(f"Game value bounds cross: {result.lower} > {result.upper}")
    logger.info(f"{spec.game_id} game value {result.value:.6f} +/- {result.gap:.2e} after {iterations} iterations")
    return result


@lru_cache(maxsize=None)
def game_value(spec: GameSpec, iterations: int = GAME_VALUE_ITERATIONS) -> GameValue:
    """``solve_game_value`` computed once per process."""
    return solve_game_value(spec, iterations)


def exploitability(
    spec: GameSpec,
    sigma: Policy,
    reference: Optional[float] = None,
    iteration: int = 0,
    abstractions: Tuple[str, str] = ("none", "none"),
) -> ExploitabilityReport:
    """Average best-response gain against ``sigma``.

    ``eps`` is (br1 + br2) / 2 and needs no game value. The per-player split
    eps1 = v + br2, eps2 = br1 - v is taken against the game value ``v``:
    ``reference`` when given, otherwise ``game_value(spec)``.
    """
    br1 = best_response_value(spec, sigma, 1)
    br2 = best_response_value(spec, sigma, 2)
    u1 = profile_value(spec, sigma, sigma)
    v = game_value(spec).value if reference is None else reference
    report = ExploitabilityReport(
        eps1=v + br2,
        eps2=br1 - v,
        eps=(br1 + br2) / 2,
        br1=br1,
        br2=br2,
        u1=u1,
        reference=v,
        value_source="solved" if reference is None else "reference",
        iteration=iteration,
        abstractions=abstractions,
        ante=spec.ante,
    )
    if report.eps < -1e-9:
        raise InvariantViolation(f"Negative exploitability {report.eps}")
    return report


def strategy_exploitability(spec: GameSpec, sigma: StrategyProfile, reference: Optional[float] = None) -> ExploitabilityReport:
    sigma.check()
    return exploitability(spec, lift_strategy(sigma), reference, sigma.iteration, sigma.profile.labels)


class _NaiveLookup:
    """Reads a vectorized policy at one concrete history."""

    def __init__(self, spec: GameSpec, policy: Policy):
        self.spec = spec
        self.policy = policy
        self.tree = get_tree(spec)
        self.tables = get_hand_tables(spec)
        self._cache: Dict[int, np.ndarray] = {}

    @cached_property
    def board_rows(self) -> List[Dict[Tuple[int, ...], int]]:
        return [{tuple(row): i for i, row in enumerate(b.tolist())} for b in self.tables.boards]

    def __call__(self, h: History, player: int) -> np.ndarray:
        node = self.tree.node(betting_key(h))
        if node.node_id not in self._cache:
            self._cache[node.node_id] = np.asarray(self.policy.policy(node.node_id))
        obs = observation(self.spec, h, player)
        board = tuple(c for group in obs.board for c in group)
        b = self.board_rows[obs.phase - 1][board]
        hole = int(combination_rank(np.asarray([sorted(obs.own_cards)]), self.spec.deck.size)[0])
        return self._cache[node.node_id][b, hole]


def _naive_total(
    spec: GameSpec,
    worlds: List[Tuple[History, float]],
    player: int,
    lookups: Dict[int, _NaiveLookup],
) -> float:
    """Weighted utility of ``player`` over worlds sharing one public betting state.

    Players missing from ``lookups`` best-respond per observation.
    """
    state, _ = replay(spec, worlds[0][0])
    if state.terminal:
        total = 0.0
        for h, w in worlds:
            final_state, theta = replay(spec, h)
            total += w * payoff(spec, final_state, theta).utilities[player - 1]
        return total
    if state.to_act == CHANCE:
        expanded = []
        for h, w in worlds:
            _, theta = replay(spec, h)
            deals = list(spec.chance.iter_deals(theta))
            expanded.extend((h + Action(CHANCE, d), w / len(deals)) for d in deals)
        return _naive_total(spec, expanded, player, lookups)
    actor = state.to_act
    tokens = state.legal_tokens(spec.max_raises)
    if actor not in lookups:
        groups: Dict[object, List[Tuple[History, float]]] = defaultdict(list)
        for h, w in worlds:
            groups[observation(spec, h, actor)].append((h, w))
        return sum(
            max(_naive_total(spec, [(h + Action(actor, t), w) for h, w in group], player, lookups)
                for t in tokens)
            for group in groups.values()
        )
    probs = [lookups[actor](h, actor) for h, _ in worlds]
    total = 0.0
    for i, t in enumerate(tokens):
        nxt = [(h + Action(actor, t), w * p[i]) for (h, w), p in zip(worlds, probs) if w * p[i] > 0]
        if nxt:
            total += _naive_total(spec, nxt, player, lookups)
    return total


def naive_best_response_value(spec: GameSpec, fixed: Policy, responder: int) -> float:
    """Best response by walking every concrete deal; small games only."""
    other = 3 - responder
    return _naive_total(spec, [(History(), 1.0)], responder, {other: _NaiveLookup(spec, fixed)})


def naive_expected_value(spec: GameSpec, first: Policy, second: Policy) -> float:
    lookups = {1: _NaiveLookup(spec, first), 2: _NaiveLookup(spec, second)}
    return _naive_total(spec, [(History(), 1.0)], 1, lookups)


@dataclass
class ExperimentCurve:
    scenario: str
    algorithm: str
    seed: int = 0
    points: List[ExploitabilityReport] = field(default_factory=list)
    strategy: Optional[StrategyProfile] = field(default=None, repr=False)

    def add(self, report: ExploitabilityReport) -> None:
        if self.points and report.iteration <= self.points[-1].iteration:
            raise InvariantViolation(
                f"Curve iterations must increase: {report.iteration} after {self.points[-1].iteration}"
            )
        self.points.append(report)

    @property
    def final(self) -> Optional[ExploitabilityReport]:
        return self.points[-1] if self.points else None

    def rows(self) -> List[Dict]:
        return [
            {
                "scenario": self.scenario,
                "algorithm": self.algorithm,
                "seed": self.seed,
                "iteration": p.iteration,
                "eps1_chips": p.eps1,
                "eps2_chips": p.eps2,
                "eps_chips": p.eps,
                "eps_milliante": p.eps_milliante,
            }
            for p in self.points
        ]


def _checkpoints(iterations: int, every: int) -> List[int]:
    if iterations < 1:
        raise ParameterError("At least one CFR iteration is required")
    marks = list(range(every, iterations + 1, every)) if every > 0 else []
    if not marks or marks[-1] != iterations:
        marks.append(iterations)
    return marks


def _solve_and_track(
    spec: GameSpec,
    solvers: Sequence[CFRSolver],
    curve: ExperimentCurve,
    iterations: int,
    checkpoint_every: int,
    reference: Optional[float],
) -> ExperimentCurve:
    """Step every solver together; the joint profile takes player p from solver p when there are two."""
    marks = set(_checkpoints(iterations, checkpoint_every))

    def joint() -> StrategyProfile:
        if len(solvers) == 1:
            return solvers[0].average_strategy()
        return StrategyProfile.combine(solvers[0].average_strategy(), solvers[1].average_strategy())

    for _ in trange(iterations, desc=f"{curve.scenario} {curve.algorithm}", leave=False):
        for solver in solvers:
            solver.iterate()
        if solvers[0].iteration in marks:
            report = strategy_exploitability(spec, joint(), reference)
            logger.info(
                f"{curve.scenario} {curve.algorithm} s{curve.seed} "
                f"t={solvers[0].iteration}: eps={report.eps:.6f}"
            )
            curve.add(report)
    curve.strategy = joint()
    return curve


def run_profile(
    spec: GameSpec,
    maps: Sequence[Optional[AbstractionMap]],
    iterations: int,
    checkpoint_every: int = 0,
    variant: str = "vanilla",
    scenario: str = "symmetric",
    algorithm: Optional[str] = None,
    seed: int = 0,
    reference: Optional[float] = None,
) -> ExperimentCurve:
    """Solve one abstracted game and evaluate its lifted average strategy at each checkpoint."""
    profile = AbstractionProfile(spec, tuple(maps))
    curve = ExperimentCurve(scenario, algorithm or "-".join(profile.labels), seed)
    solver = CFRSolver(AbstractedGame(profile), variant)
    return _solve_and_track(spec, [solver], curve, iterations, checkpoint_every, reference)


def run_symmetric(
    spec: GameSpec,
    alpha: Optional[AbstractionMap],
    iterations: int,
    checkpoint_every: int = 0,
    variant: str = "vanilla",
    algorithm: Optional[str] = None,
    seed: int = 0,
    reference: Optional[float] = None,
) -> ExperimentCurve:
    """Both players abstracted by ``alpha``."""
    return run_profile(spec, (alpha, alpha), iterations, checkpoint_every, variant,
                       "symmetric", algorithm or map_label(alpha), seed, reference)


def run_asymmetric(
    spec: GameSpec,
    alpha: Sequence[Optional[AbstractionMap]],
    iterations: int,
    checkpoint_every: int = 0,
    variant: str = "vanilla",
    algorithm: Optional[str] = None,
    seed: int = 0,
    unabstracted: str = "auto",
    reference: Optional[float] = None,
) -> ExperimentCurve:
    """Solve (alpha_1, full) and (full, alpha_2), then pair player 1 of the first with player 2 of the second."""
    alpha1, alpha2 = alpha
    full = unabstracted_map(spec, unabstracted)
    solvers = [
        CFRSolver(AbstractedGame(AbstractionProfile(spec, (alpha1, full))), variant),
        CFRSolver(AbstractedGame(AbstractionProfile(spec, (full, alpha2))), variant),
    ]
    curve = ExperimentCurve("asymmetric", algorithm or map_label(alpha1), seed)
    return _solve_and_track(spec, solvers, curve, iterations, checkpoint_every, reference)
