"""Signal observation abstractions: LI, PAOI, k-ROI/FROI, EHS and PAAEMD.

Every map is indexed by canonical (suit-isomorphism) index. Features are
computed once per canonical class on its representative and hold for the
whole class because they are invariant under the game's card symmetry.
Outcome features are exact integer counts; grouping uses exact equality.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cards import combination_rank
from .clustering import emd_distance, squared_l2, weighted_kmeans
from .core import ObservationInfoset
from .errors import DependencyError, DomainError, ParameterError, PhaseError
from .games import GAMES, GameSpec
from .hands import get_hand_tables
from .indexing import get_index, raw_observation_count

logger = logging.getLogger(__name__)

ALGORITHMS = ("none", "li", "paoi", "kroi", "froi", "ehs", "paaemd")
SEEDED_ALGORITHMS = ("paaemd",)

# Published hold'em class counts per phase; tables past the preflop are too large to build here.
REFERENCE_COUNTS: Dict[Tuple[str, str], Tuple[int, ...]] = {
    ("hulh-cards", "li"): (169, 1_286_792, 55_190_538, 2_428_287_420),
    ("hulh-cards", "paoi"): (169, 1_137_132, 2_337_912, 20_687),
    ("hulh-cards", "froi"): (169, 1_241_210, 42_040_233, 638_585_633),
}
# (phase, recall depth) -> k-ROI classes
KROI_REFERENCE_COUNTS: Dict[str, Dict[Tuple[int, int], int]] = {
    "hulh-cards": {
        (1, 0): 169,
        (2, 0): 1_137_132, (2, 1): 1_241_210,
        (3, 0): 2_337_912, (3, 1): 38_938_975, (3, 2): 42_040_233,
        (4, 0): 20_687, (4, 1): 39_792_212, (4, 2): 586_622_784, (4, 3): 638_585_633,
    },
}


@dataclass(frozen=True, eq=False)
class AbstractionMap:
    """Per-phase bucket id for every canonical observation index.

    ``algorithm`` is a label; equality compares the game and the partition.
    """
    game_id: str
    algorithm: str
    buckets: Tuple[np.ndarray, ...]

    def __post_init__(self):
        fixed = []
        for phase, b in enumerate(self.buckets, start=1):
            b = np.asarray(b, dtype=np.int64).reshape(-1)
            if b.size == 0:
                raise DomainError(f"Phase {phase} map is empty")
            present = np.unique(b)
            if present[0] != 0 or present[-1] != present.size - 1:
                raise DomainError(f"Phase {phase} bucket ids are not dense")
            fixed.append(b)
        object.__setattr__(self, "buckets", tuple(fixed))

    @property
    def phases(self) -> int:
        return len(self.buckets)

    def bucket_count(self, phase: int) -> int:
        return int(self.buckets[phase - 1].max()) + 1

    @property
    def counts(self) -> Tuple[int, ...]:
        return tuple(self.bucket_count(p) for p in range(1, self.phases + 1))

    def bucket_of(self, phase: int, canonical: np.ndarray) -> np.ndarray:
        return self.buckets[phase - 1][canonical]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AbstractionMap):
            return NotImplemented
        return (
            self.game_id == other.game_id
            and len(self.buckets) == len(other.buckets)
            and all(np.array_equal(a, b) for a, b in zip(self.buckets, other.buckets))
        )


def map_from_labels(game_id: str, algorithm: str, labels: Sequence[np.ndarray]) -> AbstractionMap:
    """Renumber arbitrary labels densely, keeping their sorted order."""
    dense = [np.unique(np.asarray(l), return_inverse=True)[1].reshape(-1) for l in labels]
    return AbstractionMap(game_id, algorithm, tuple(dense))


@dataclass(frozen=True)
class OutcomeFeature:
    """Exact count vector with a shared denominator."""
    phase: int
    counts: Tuple[int, ...]
    denominator: int

    @property
    def fractions(self) -> Tuple[Fraction, ...]:
        return tuple(Fraction(c, self.denominator) for c in self.counts)


@dataclass(frozen=True)
class TransitionHistogram:
    phase: int
    counts: Tuple[int, ...]
    denominator: int

    @property
    def probabilities(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.denominator


@dataclass(frozen=True)
class KRecallFeature:
    labels: Tuple[int, ...]


@dataclass(frozen=True)
class ExtendedSignalSet:
    """Raw observations of ``phase`` that extend ``source``."""
    source: ObservationInfoset
    phase: int
    rows: np.ndarray


def _group(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows)
    if rows.ndim == 1:
        return np.unique(rows, return_inverse=True)[1].reshape(-1)
    return np.unique(rows, axis=0, return_inverse=True)[1].reshape(-1)


def _canonical(spec: GameSpec, psi: ObservationInfoset) -> int:
    return get_index(spec, psi.phase).canonical_index(psi).index


def _check_phase(spec: GameSpec, phase: int) -> None:
    if not 1 <= phase <= spec.phases:
        raise PhaseError(f"Phase {phase} outside 1..{spec.phases}")


def build_li(spec: GameSpec) -> AbstractionMap:
    """Lossless isomorphism: one bucket per canonical class."""
    buckets = tuple(
        np.arange(get_index(spec, p).canonical_count) for p in range(1, spec.phases + 1)
    )
    return AbstractionMap(spec.game_id, "li", buckets)


@lru_cache(maxsize=None)
def winrate_table(spec: GameSpec) -> Tuple[np.ndarray, int]:
    """(loss, tie, win) counts for every final-phase canonical class, plus the denominator."""
    index = get_index(spec, spec.phases)
    tables = get_hand_tables(spec)
    reps = index.raw_cards[index.first_raw]
    hole_idx = combination_rank(reps[:, :spec.holes], spec.deck.size)
    set_idx = tables.set_index(reps[:, spec.holes:])
    counts = tables.winrate_counts(hole_idx, set_idx)
    logger.info(f"{spec.game_id}: winrate features for {counts.shape[0]} final classes")
    return counts, tables.opponent_count


def winrate_outcome_feature(psi: ObservationInfoset, spec: GameSpec) -> OutcomeFeature:
    """Loss, tie and win counts of ``psi`` against every opponent hole."""
    if psi.phase != spec.phases:
        raise PhaseError(f"Winrate features are final-phase only (got phase {psi.phase})")
    counts, denominator = winrate_table(spec)
    row = counts[_canonical(spec, psi)]
    return OutcomeFeature(psi.phase, tuple(int(c) for c in row), denominator)


def child_labels(spec: GameSpec, phase: int, next_labels: np.ndarray) -> np.ndarray:
    """(classes, fanout) next-phase labels of each class representative's successors."""
    index = get_index(spec, phase)
    nxt = get_index(spec, phase + 1)
    children = index.first_raw[:, None] * nxt.fanout + np.arange(nxt.fanout)[None, :]
    return np.asarray(next_labels)[nxt.raw_to_canonical[children]]


def _histogram_rows(labels: np.ndarray, width: int) -> np.ndarray:
    rows = labels.shape[0]
    flat = (np.arange(rows)[:, None] * width + labels).ravel()
    return np.bincount(flat, minlength=rows * width).reshape(rows, width)


def _next_map(spec: GameSpec, phase: int, next_map: Optional[AbstractionMap]) -> np.ndarray:
    if phase >= spec.phases:
        raise PhaseError(f"Phase {phase} has no successor phase")
    if next_map is None or next_map.phases < phase + 1:
        raise DependencyError(f"Phase {phase + 1} clustering is required")
    return next_map.buckets[phase]


def paof(psi: ObservationInfoset, next_map: Optional[AbstractionMap], spec: GameSpec) -> OutcomeFeature:
    """Histogram of next-phase classes reached by one more deal.

    Raises:
        DependencyError: ``next_map`` does not cover phase ``psi.phase + 1``
    """
    labels = _next_map(spec, psi.phase, next_map)
    row = child_labels(spec, psi.phase, labels)[_canonical(spec, psi)]
    width = int(labels.max()) + 1
    counts = np.bincount(row, minlength=width)
    return OutcomeFeature(psi.phase, tuple(int(c) for c in counts), row.shape[0])


def transition_histogram(
    psi: ObservationInfoset, next_clusters: Optional[AbstractionMap], spec: GameSpec
) -> TransitionHistogram:
    feature = paof(psi, next_clusters, spec)
    return TransitionHistogram(feature.phase, feature.counts, feature.denominator)


@lru_cache(maxsize=None)
def build_paoi(spec: GameSpec) -> AbstractionMap:
    """Potential-aware outcome isomorphism, built from the final phase backwards."""
    counts, _ = winrate_table(spec)
    labels: List[np.ndarray] = [None] * spec.phases
    labels[-1] = _group(counts)
    for phase in range(spec.phases - 1, 0, -1):
        rows = np.sort(child_labels(spec, phase, labels[phase]), axis=1)
        labels[phase - 1] = _group(rows)
    result = AbstractionMap(spec.game_id, "paoi", tuple(labels))
    logger.info(f"{spec.game_id} PAOI classes per phase: {result.counts}")
    return result


def recall_features(spec: GameSpec, phase: int, k: int, paoi: AbstractionMap) -> np.ndarray:
    """(classes, k + 1) PAOI labels of each class and its k predecessors."""
    index = get_index(spec, phase)
    columns = [paoi.buckets[phase - 1]]
    raw = index.first_raw.copy()
    for back in range(1, k + 1):
        raw = raw // get_index(spec, phase - back + 1).fanout
        prev = get_index(spec, phase - back)
        columns.append(paoi.buckets[phase - back - 1][prev.raw_to_canonical[raw]])
    return np.stack(columns, axis=1)


def build_kroi(spec: GameSpec, k: Sequence[int], paoi: Optional[AbstractionMap] = None) -> AbstractionMap:
    """k-recall outcome isomorphism with one recall depth per phase.

    Raises:
        ParameterError: a depth is negative or reaches before phase 1
    """
    k = list(k)
    if len(k) != spec.phases:
        raise ParameterError(f"Need one recall depth per phase ({spec.phases}), got {k}")
    for phase, depth in enumerate(k, start=1):
        if not 0 <= depth <= phase - 1:
            raise ParameterError(f"Phase {phase} recall depth {depth} outside 0..{phase - 1}")
    paoi = paoi or build_paoi(spec)
    labels = [_group(recall_features(spec, p, d, paoi)) for p, d in enumerate(k, start=1)]
    algorithm = "froi" if all(d == p - 1 for p, d in enumerate(k, start=1)) else "kroi"
    return AbstractionMap(spec.game_id, algorithm, tuple(labels))


def build_froi(spec: GameSpec) -> AbstractionMap:
    return build_kroi(spec, [p - 1 for p in range(1, spec.phases + 1)])


def kroi_feature(psi: ObservationInfoset, k: int, spec: GameSpec) -> KRecallFeature:
    if not 0 <= k <= psi.phase - 1:
        raise ParameterError(f"Recall depth {k} outside 0..{psi.phase - 1}")
    row = recall_features(spec, psi.phase, k, build_paoi(spec))[_canonical(spec, psi)]
    return KRecallFeature(tuple(int(v) for v in row))


@lru_cache(maxsize=None)
def expected_equity_table(spec: GameSpec, phase: int) -> Tuple[np.ndarray, int]:
    """Equity numerators (2 * wins + ties over final extensions) per class, and the denominator."""
    _check_phase(spec, phase)
    counts, opponents = winrate_table(spec)
    final_num = 2 * counts[:, 2] + counts[:, 1]
    denominator = 2 * opponents
    if phase == spec.phases:
        return final_num, denominator
    final = get_index(spec, spec.phases)
    index = get_index(spec, phase)
    per_raw = final_num[final.raw_to_canonical]
    descendants = final.raw_count // index.raw_count
    sums = per_raw.reshape(index.raw_count, descendants).sum(axis=1)
    return sums[index.first_raw], denominator * descendants


def extended_signals(psi: ObservationInfoset, phase: int, spec: GameSpec) -> ExtendedSignalSet:
    """Raw observations of ``phase`` extending ``psi`` (``psi`` itself when phases match)."""
    if phase < psi.phase:
        raise PhaseError(f"Cannot extend phase {psi.phase} back to phase {phase}")
    _check_phase(spec, phase)
    rows = get_index(spec, psi.phase).raw_rank(np.asarray([psi.cards()]))
    for p in range(psi.phase + 1, phase + 1):
        f = get_index(spec, p).fanout
        rows = (rows[:, None] * f + np.arange(f)[None, :]).ravel()
    return ExtendedSignalSet(psi, phase, rows)


def ehs_equity(psi: ObservationInfoset, spec: GameSpec) -> Fraction:
    """Expected showdown equity w + t/2 over all final extensions."""
    num, den = expected_equity_table(spec, psi.phase)
    return Fraction(int(num[_canonical(spec, psi)]), den)


def _ehs_buckets(num: np.ndarray, den: int, n: int) -> np.ndarray:
    # range ((m-1)/n, m/n] holds bucket m-1; the lowest range is closed at 0
    return np.maximum((num * n + den - 1) // den - 1, 0)


def build_ehs(spec: GameSpec, buckets: Sequence[int]) -> AbstractionMap:
    """Contiguous equity ranges per phase; 0 ranges keeps the phase lossless.

    Empty ranges are dropped so bucket ids stay dense.
    """
    buckets = list(buckets)
    if len(buckets) != spec.phases or any(n < 0 for n in buckets):
        raise ParameterError(f"Need {spec.phases} nonnegative bucket counts, got {buckets}")
    labels = []
    for phase, n in enumerate(buckets, start=1):
        if n == 0:
            labels.append(np.arange(get_index(spec, phase).canonical_count))
            continue
        num, den = expected_equity_table(spec, phase)
        raw = _ehs_buckets(num, den, n)
        if np.unique(raw).size < n:
            logger.warning(f"EHS phase {phase}: {n - np.unique(raw).size} of {n} ranges are empty")
        labels.append(raw)
    return map_from_labels(spec.game_id, "ehs", labels)


def build_paaemd(spec: GameSpec, clusters: Sequence[int], seed: int = 0) -> AbstractionMap:
    """Potential-aware abstraction with earth mover's distance.

    The final phase clusters equity with squared L2; earlier phases cluster
    histograms over next-phase clusters with EMD, whose ground distance is
    the equity gap between final centroids or, further back, the EMD between
    next-phase centroid histograms. A count of 0 keeps a phase lossless.
    Equal features are merged before clustering, so they always share a
    cluster.
    """
    clusters = list(clusters)
    if len(clusters) != spec.phases or any(m < 0 for m in clusters):
        raise ParameterError(f"Need {spec.phases} nonnegative cluster counts, got {clusters}")
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(spec.phases)]
    labels: List[np.ndarray] = [None] * spec.phases
    ground: Optional[np.ndarray] = None
    for phase in range(spec.phases, 0, -1):
        index = get_index(spec, phase)
        m = clusters[phase - 1]
        if phase == spec.phases:
            num, den = expected_equity_table(spec, phase)
            if m == 0:
                lab, centers = np.arange(index.canonical_count), num / den
            else:
                values, inverse = np.unique(num, return_inverse=True)
                inverse = inverse.reshape(-1)
                weights = np.bincount(inverse, weights=index.class_sizes)
                km = weighted_kmeans((values / den)[:, None], weights, m, squared_l2, rngs[phase - 1])
                lab, centers = km.labels[inverse], km.centers[:, 0]
            if phase > 1 and clusters[phase - 2] > 0:
                ground = np.abs(centers[:, None] - centers[None, :])
        else:
            rows = child_labels(spec, phase, labels[phase])
            width = int(labels[phase].max()) + 1
            counts = _histogram_rows(rows, width)
            fanout = rows.shape[1]
            if m == 0:
                lab, centers = np.arange(index.canonical_count), counts / fanout
            else:
                values, inverse = np.unique(counts, axis=0, return_inverse=True)
                inverse = inverse.reshape(-1)
                weights = np.bincount(inverse, weights=index.class_sizes)
                km = weighted_kmeans(values / fanout, weights, m, emd_distance(ground), rngs[phase - 1])
                lab, centers = km.labels[inverse], km.centers
            if phase > 1 and clusters[phase - 2] > 0:
                ground = emd_distance(ground)(centers, centers)
                np.fill_diagonal(ground, 0.0)
                ground = np.maximum(ground, ground.T)
        labels[phase - 1] = lab
        logger.info(f"PAAEMD {spec.game_id} phase {phase}: {int(lab.max()) + 1} clusters")
    return map_from_labels(spec.game_id, "paaemd", labels)


def check_refinement(a: AbstractionMap, b: AbstractionMap) -> List[bool]:
    """Per phase, True when every ``b`` bucket is a union of ``a`` buckets."""
    if a.game_id != b.game_id or a.phases != b.phases:
        raise DomainError(f"Maps belong to different games: {a.game_id} vs {b.game_id}")
    out = []
    for pa, pb in zip(a.buckets, b.buckets):
        if pa.shape != pb.shape:
            raise DomainError("Maps index different observation tables")
        pairs = np.unique(np.stack([pa, pb], axis=1), axis=0).shape[0]
        out.append(pairs == np.unique(pa).size)
    return out


def class_sizes(amap: AbstractionMap, spec: GameSpec) -> List[np.ndarray]:
    """Raw observations per bucket, per phase."""
    return [
        np.bincount(b, weights=get_index(spec, p).class_sizes, minlength=amap.bucket_count(p)).astype(np.int64)
        for p, b in enumerate(amap.buckets, start=1)
    ]


def build_map(
    spec: GameSpec,
    algorithm: str,
    *,
    k: Optional[Sequence[int]] = None,
    buckets: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> Optional[AbstractionMap]:
    """Dispatch by algorithm name; ``none`` returns None (identity over raw observations)."""
    if algorithm == "none":
        return None
    if algorithm == "li":
        return build_li(spec)
    if algorithm == "paoi":
        return build_paoi(spec)
    if algorithm == "froi":
        return build_froi(spec)
    if algorithm == "kroi":
        if k is None:
            raise ParameterError("k-ROI needs one recall depth per phase")
        return build_kroi(spec, k)
    if algorithm in ("ehs", "paaemd"):
        if buckets is None:
            raise ParameterError(f"{algorithm} needs a bucket count per phase")
        if algorithm == "ehs":
            return build_ehs(spec, buckets)
        return build_paaemd(spec, buckets, seed)
    raise ParameterError(f"Unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")


def phase_counts(spec: GameSpec, algorithm: str, **params) -> Tuple[int, ...]:
    """Classes per phase; raw observation counts for ``none``."""
    if algorithm == "none":
        return tuple(raw_observation_count(spec, p) for p in range(1, spec.phases + 1))
    return build_map(spec, algorithm, **params).counts


def reference_counts(spec: GameSpec, algorithm: str, k: Optional[Sequence[int]] = None) -> Optional[Tuple[int, ...]]:
    """Published class counts for a registered game's own rules, or None when there are none."""
    if GAMES.get(spec.game_id) != spec:
        return None
    if algorithm == "kroi":
        table = KROI_REFERENCE_COUNTS.get(spec.game_id)
        if table is None or k is None or len(k) != spec.phases:
            return None
        try:
            return tuple(table[(p, d)] for p, d in enumerate(k, start=1))
        except KeyError:
            return None
    return REFERENCE_COUNTS.get((spec.game_id, algorithm))
