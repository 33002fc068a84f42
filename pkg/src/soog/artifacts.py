"""Binary and CSV persistence for abstraction maps, strategies and experiment curves.

Binary layouts are little-endian. Abstraction map ("SOAB"): magic, u16
version, u16-length game id, u8 phase count, then per phase u32 bucket
count, u32 entry count and the u32 bucket ids by canonical index.
Strategy ("SOST"): magic, u16 version, game id, the first 16 bytes of the
profile hash, both players' abstraction labels, u32 iteration and record
count, then per decision node its key, u8 actor, u32 buckets, u8 actions
and float64 probabilities.
"""

import csv
import hashlib
import io
import json
import logging
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .abstraction import AbstractionMap
from .errors import DependencyError, ValidationError
from .evaluator import GAME_VALUE_ITERATIONS, ExperimentCurve, ExploitabilityReport, GameValue, solve_game_value
from .games import GameSpec, get_tree
from .solver import AbstractionProfile, StrategyProfile

logger = logging.getLogger(__name__)

MAP_MAGIC = b"SOAB"
STRATEGY_MAGIC = b"SOST"
FORMAT_VERSION = 1
HASH_BYTES = 16

CURVE_COLUMNS = (
    "scenario", "algorithm", "seed", "iteration",
    "eps1_chips", "eps2_chips", "eps_chips", "eps_milliante",
)


def _pack_text(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


class _Reader:
    """Cursor over a byte buffer; short reads raise ValidationError."""

    def __init__(self, data: bytes, what: str):
        self.data = data
        self.offset = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise ValidationError(f"Truncated {self.what}")
        out = self.data[self.offset:self.offset + n]
        self.offset += n
        return out

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self) -> str:
        (n,) = self.unpack("<H")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ValidationError(f"Bad text field in {self.what}: {e}")

    def array(self, count: int, dtype: str) -> np.ndarray:
        width = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * width), dtype=dtype).copy()

    def header(self, magic: bytes) -> None:
        if self.take(len(magic)) != magic:
            raise ValidationError(f"Not a {magic.decode()} file")
        (version,) = self.unpack("<H")
        if version != FORMAT_VERSION:
            raise ValidationError(f"Unsupported {magic.decode()} version {version}")

    def done(self) -> None:
        if self.offset != len(self.data):
            raise ValidationError(f"Trailing bytes in {self.what}")


def map_bytes(amap: AbstractionMap) -> bytes:
    out = [MAP_MAGIC, struct.pack("<H", FORMAT_VERSION), _pack_text(amap.game_id)]
    out.append(struct.pack("<B", amap.phases))
    for phase, buckets in enumerate(amap.buckets, start=1):
        out.append(struct.pack("<II", amap.bucket_count(phase), buckets.shape[0]))
        out.append(buckets.astype("<u4").tobytes())
    return b"".join(out)


def map_from_bytes(data: bytes, algorithm: str = "unknown") -> AbstractionMap:
    """The algorithm is a label only; the file stores the partition."""
    reader = _Reader(data, "abstraction map")
    reader.header(MAP_MAGIC)
    game_id = reader.text()
    (phases,) = reader.unpack("<B")
    buckets = []
    for phase in range(1, phases + 1):
        count, entries = reader.unpack("<II")
        ids = reader.array(entries, "<u4").astype(np.int64)
        if entries and int(ids.max()) + 1 != count:
            raise ValidationError(f"Phase {phase} bucket count {count} disagrees with its entries")
        buckets.append(ids)
    reader.done()
    try:
        return AbstractionMap(game_id, algorithm, tuple(buckets))
    except Exception as e:
        raise ValidationError(f"Invalid abstraction map: {e}")


def write_map(amap: AbstractionMap, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(map_bytes(amap))
    write_map_csv(amap, path.with_suffix(".csv"))
    logger.info(f"Wrote {amap.algorithm} map for {amap.game_id} to {path}")
    return path


def write_map_csv(amap: AbstractionMap, path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["phase", "index", "bucket"])
        for phase, buckets in enumerate(amap.buckets, start=1):
            writer.writerows((phase, i, int(b)) for i, b in enumerate(buckets))


def map_file_name(game_id: str, algorithm: str, seed: Optional[int] = None) -> str:
    return f"{game_id}_{algorithm}" + ("" if seed is None else f"_s{seed}") + ".soab"


def read_map(path: Path, algorithm: Optional[str] = None) -> AbstractionMap:
    """Load a map; the algorithm label defaults to the one in a standard file name.

    Raises:
        DependencyError: the file is missing
        ValidationError: the file is malformed
    """
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"Abstraction map not found: {path}", str(path))
    amap = map_from_bytes(path.read_bytes())
    if algorithm is None:
        prefix = f"{amap.game_id}_"
        stem = path.stem
        algorithm = stem[len(prefix):].split("_")[0] if stem.startswith(prefix) else "unknown"
    return AbstractionMap(amap.game_id, algorithm, amap.buckets)


def profile_hash(profile: AbstractionProfile) -> bytes:
    digest = hashlib.sha256()
    digest.update(profile.spec.game_id.encode("utf-8"))
    for amap in profile.maps:
        digest.update(b"none" if amap is None else map_bytes(amap))
    return digest.digest()[:HASH_BYTES]


@dataclass
class StoredStrategy:
    """Strategy file contents before they are bound to a profile."""
    game_id: str
    profile_hash: bytes
    labels: Tuple[str, str]
    iteration: int
    policies: Dict[Tuple[str, ...], np.ndarray]

    def bind(self, profile: AbstractionProfile) -> StrategyProfile:
        """Attach to the profile it was solved on.

        Raises:
            ValidationError: game, profile hash or tree shape disagree
        """
        if profile.spec.game_id != self.game_id:
            raise ValidationError(f"Strategy is for {self.game_id}, not {profile.spec.game_id}")
        if profile_hash(profile) != self.profile_hash:
            raise ValidationError("Strategy was solved on a different abstraction profile")
        tree = get_tree(profile.spec)
        policies = {}
        for node in tree.decisions():
            if node.key not in self.policies:
                raise ValidationError(f"Strategy has no record for {node.key_text!r}")
            policies[node.node_id] = self.policies[node.key]
        return StrategyProfile(profile, policies, self.iteration)


def strategy_bytes(sigma: StrategyProfile) -> bytes:
    profile = sigma.profile
    tree = get_tree(profile.spec)
    out = [STRATEGY_MAGIC, struct.pack("<H", FORMAT_VERSION), _pack_text(profile.spec.game_id)]
    out.append(profile_hash(profile))
    out.extend(_pack_text(label) for label in profile.labels)
    decisions = tree.decisions()
    out.append(struct.pack("<II", sigma.iteration, len(decisions)))
    for node in decisions:
        probs = sigma.policies[node.node_id]
        out.append(_pack_text(node.key_text))
        out.append(struct.pack("<BIB", node.actor, probs.shape[0], probs.shape[1]))
        out.append(probs.astype("<f8").tobytes())
    return b"".join(out)


def strategy_from_bytes(data: bytes) -> StoredStrategy:
    reader = _Reader(data, "strategy")
    reader.header(STRATEGY_MAGIC)
    game_id = reader.text()
    digest = reader.take(HASH_BYTES)
    labels = (reader.text(), reader.text())
    iteration, records = reader.unpack("<II")
    policies = {}
    for _ in range(records):
        key_text = reader.text()
        _, buckets, actions = reader.unpack("<BIB")
        probs = reader.array(buckets * actions, "<f8").reshape(buckets, actions)
        policies[tuple(key_text.split(" ")) if key_text else ()] = probs
    reader.done()
    return StoredStrategy(game_id, digest, labels, iteration, policies)


def write_strategy(sigma: StrategyProfile, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(strategy_bytes(sigma))
    write_strategy_csv(sigma, path.with_suffix(".csv"))
    logger.info(f"Wrote strategy ({sigma.iteration} iterations) to {path}")
    return path


def write_strategy_csv(sigma: StrategyProfile, path: Path) -> None:
    tree = get_tree(sigma.profile.spec)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["key", "actor", "bucket", "action", "probability"])
        for node in tree.decisions():
            probs = sigma.policies[node.node_id]
            for bucket in range(probs.shape[0]):
                for i, token in enumerate(node.actions):
                    writer.writerow([node.key_text, node.actor, bucket, token, repr(float(probs[bucket, i]))])


def read_strategy(path: Path) -> StoredStrategy:
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"Strategy not found: {path}", str(path))
    return strategy_from_bytes(path.read_bytes())


def curve_csv(rows: Iterable[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CURVE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def write_curve_rows(rows: Iterable[Dict[str, Any]], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(curve_csv(rows))
    return path


def write_curves(curves: Sequence[ExperimentCurve], path: Path) -> Path:
    return write_curve_rows([row for curve in curves for row in curve.rows()], path)


def read_curve_rows(path: Path) -> List[Dict[str, Any]]:
    """Typed rows of a curve CSV."""
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"Curve file not found: {path}", str(path))
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CURVE_COLUMNS:
            raise ValidationError(f"{path} does not have the curve header")
        rows = []
        for row in reader:
            try:
                rows.append({
                    "scenario": row["scenario"],
                    "algorithm": row["algorithm"],
                    "seed": int(row["seed"]),
                    "iteration": int(row["iteration"]),
                    **{k: float(row[k]) for k in CURVE_COLUMNS[4:]},
                })
            except ValueError as e:
                raise ValidationError(f"Bad curve row in {path}: {e}")
    return rows


def write_report(report: ExploitabilityReport, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2))
    return path


def read_report(path: Path) -> ExploitabilityReport:
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"Report not found: {path}", str(path))
    try:
        return ExploitabilityReport.from_dict(json.loads(path.read_text()))
    except (ValueError, TypeError) as e:
        raise ValidationError(f"Bad report {path}: {e}")


def write_summary(summary: Dict[str, Any], path: Path, created_at: Optional[datetime] = None) -> Path:
    """JSON summary with sorted keys; the UTC creation time goes to a ``.meta.json`` sidecar.

    The summary itself depends only on its inputs, so reruns write identical bytes.
    """
    stamp = (created_at or datetime.now(timezone.utc)).isoformat()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    summary_meta_path(path).write_text(json.dumps({"created_at": stamp, "summary": path.name}, indent=2, sort_keys=True))
    return path


def summary_meta_path(path: Path) -> Path:
    return Path(path).with_suffix(".meta.json")


def value_file_name(spec: GameSpec) -> str:
    """One cache file per rule set; overridden rules get their own file."""
    digest = hashlib.sha256(spec.model_dump_json().encode("utf-8")).hexdigest()[:12]
    return f"{spec.game_id}_{digest}.json"


def read_game_value(path: Path) -> GameValue:
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"Game value not found: {path}", str(path))
    try:
        return GameValue.from_dict(json.loads(path.read_text()))
    except (ValueError, TypeError, KeyError) as e:
        raise ValidationError(f"Bad game value {path}: {e}")


def write_game_value(value: GameValue, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value.to_dict(), indent=2, sort_keys=True))
    return path


def load_game_value(spec: GameSpec, out: Path, iterations: int = GAME_VALUE_ITERATIONS) -> GameValue:
    """Game value from ``out/values``, solving and saving it on a miss.

    A cached value solved with a different iteration count is replaced.
    """
    path = Path(out) / "values" / value_file_name(spec)
    if path.exists():
        cached = read_game_value(path)
        if cached.iterations == iterations and cached.game_id == spec.game_id:
            logger.info(f"Using cached game value {cached.value:.6f} from {path}")
            return cached
        logger.info(f"Cached game value at {path} used {cached.iterations} iterations; solving again")
    value = solve_game_value(spec, iterations)
    write_game_value(value, path)
    return value
