"""Experiment configuration.

Values are loaded from, in order of increasing precedence:
1. Default values in the class definitions
2. Environment variables (loaded via load_dotenv())
3. A flat key=value config file
4. Command line arguments
"""

import argparse
import logging
import os
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Tuple

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError as PydanticValidationError

from .abstraction import ALGORITHMS
from .evaluator import GAME_VALUE_ITERATIONS
from .errors import ConfigError
from .games import GAMES, GameSpec, get_game
from .solver import VARIANTS

load_dotenv()

logger = logging.getLogger(__name__)

GAME_KEYS = ("holes", "ante", "bet.phase1", "bet.postflop", "max_raises")
CONFIG_KEYS = GAME_KEYS + (
    "game",
    "abstraction.algorithm",
    "abstraction.k",
    "abstraction.buckets",
    "abstraction.seed",
    "abstraction.player",
    "scenario",
    "cfr.variant",
    "cfr.iterations",
    "cfr.checkpoint_every",
    "seed",
    "out",
    "jobs",
    "report.algorithms",
    "report.seeds",
    "report.delta",
    "value.iterations",
    "unabstracted",
)

# Per-phase bucket counts for EHS and PAAEMD when none are configured; 0 keeps a phase lossless.
DEFAULT_BUCKETS: Dict[str, Tuple[int, ...]] = {
    "leduc": (0, 3),
    "numeral211": (0, 225, 396),
}

DEFAULT_REPORT_ALGORITHMS = ("ehs", "paaemd", "paoi", "froi", "li")


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment.

    Raises:
        ConfigError: malformed line, unknown or repeated key
    """
    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{number}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{number}: {key} set twice")
        values[key] = value
    return values


def parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}")


def parse_int_list(text: str, key: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated list of integers, got {text!r}")


def derive_seeds(seed: int, count: int) -> List[int]:
    """Independent sub-seeds in a fixed order."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


class AbstractionConfig(BaseModel):
    algorithm: Literal["none", "li", "paoi", "kroi", "froi", "ehs", "paaemd"] = "paoi"
    k: Optional[List[int]] = None
    buckets: Optional[List[int]] = None
    seed: Optional[int] = None
    player: Literal["both", "1", "2"] = "both"

    def bucket_counts(self, game_id: str) -> Optional[List[int]]:
        if self.buckets is not None:
            return self.buckets
        if self.algorithm in ("ehs", "paaemd") and game_id in DEFAULT_BUCKETS:
            return list(DEFAULT_BUCKETS[game_id])
        return None


class CFRConfig(BaseModel):
    variant: Literal["vanilla", "plus"] = "vanilla"
    iterations: int = Field(1000, ge=1)
    checkpoint_every: int = Field(100, ge=0)


class ExperimentConfig(BaseModel):
    """Top-level configuration shared by every command."""

    game: str = "leduc"
    game_overrides: Dict[str, int] = Field(default_factory=dict)
    abstraction: AbstractionConfig = Field(default_factory=AbstractionConfig)
    scenario: Literal["asymmetric", "symmetric"] = "symmetric"
    cfr: CFRConfig = Field(default_factory=CFRConfig)
    seed: int = 0
    out: Path = Path("out")
    jobs: int = Field(1, ge=1)
    report_algorithms: List[str] = Field(default_factory=lambda: list(DEFAULT_REPORT_ALGORITHMS))
    report_seeds: int = Field(5, ge=1)
    # None estimates the slack from the lossless runs of each report.
    report_delta: Optional[float] = Field(None, ge=0.0)
    value_iterations: int = Field(GAME_VALUE_ITERATIONS, ge=1)
    unabstracted: Literal["auto", "none", "li"] = "auto"

    @classmethod
    def from_env(cls) -> "ExperimentConfig":
        """Create configuration from SOOG_* environment variables."""
        data: Dict[str, object] = {}
        if os.environ.get("SOOG_GAME", "").strip():
            data["game"] = os.environ["SOOG_GAME"].strip()
        if os.environ.get("SOOG_OUT", "").strip():
            data["out"] = os.environ["SOOG_OUT"].strip()
        for name, field in (("SOOG_SEED", "seed"), ("SOOG_JOBS", "jobs")):
            raw = os.environ.get(name, "").strip()
            if raw:
                try:
                    data[field] = int(raw)
                except ValueError:
                    raise ConfigError(f"{name} must be an integer, got {raw!r}")
        return cls._build(data)

    @classmethod
    def _build(cls, data: Mapping[str, object]) -> "ExperimentConfig":
        try:
            return cls(**data)
        except PydanticValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}")

    def with_values(self, values: Mapping[str, str]) -> "ExperimentConfig":
        """Apply flat config-file keys on top of this configuration."""
        data = self.model_dump()
        abstraction = data["abstraction"]
        cfr = data["cfr"]
        for key, value in values.items():
            if key not in CONFIG_KEYS:
                raise ConfigError(f"Unknown key {key!r}")
            if key in GAME_KEYS:
                data["game_overrides"][key] = parse_int(value, key)
            elif key == "abstraction.k":
                abstraction["k"] = parse_int_list(value, key)
            elif key == "abstraction.buckets":
                abstraction["buckets"] = parse_int_list(value, key)
            elif key.startswith("abstraction."):
                abstraction[key.split(".", 1)[1]] = value
            elif key.startswith("cfr."):
                cfr[key.split(".", 1)[1]] = value
            elif key == "report.algorithms":
                data["report_algorithms"] = [a.strip() for a in value.split(",") if a.strip()]
            elif key == "report.delta" and value.lower() == "auto":
                data["report_delta"] = None
            elif key == "value.iterations":
                data["value_iterations"] = value
            elif key.startswith("report."):
                data["report_" + key.split(".", 1)[1]] = value
            else:
                data[key] = value
        return self._build(data)

    @classmethod
    def from_file(cls, path: Path, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        values = parse_config_text(path.read_text(), str(path))
        logger.info(f"Loaded {len(values)} settings from {path}")
        return (base or cls.from_env()).with_values(values)

    @classmethod
    def from_cli_and_env(cls, args: argparse.Namespace) -> "ExperimentConfig":
        """Create configuration from CLI arguments, falling back to the file and environment."""
        config = cls.from_env()
        if getattr(args, "config", None):
            config = cls.from_file(args.config, config)
        updates: Dict[str, object] = {}
        if getattr(args, "game", None):
            updates["game"] = args.game
        if getattr(args, "out", None):
            updates["out"] = args.out
        if getattr(args, "jobs", None) is not None:
            updates["jobs"] = args.jobs
        if getattr(args, "seed", None) is not None:
            updates["seed"] = args.seed
        if getattr(args, "scenario", None):
            updates["scenario"] = args.scenario
        abstraction = config.abstraction.model_dump()
        if getattr(args, "algorithm", None):
            abstraction["algorithm"] = args.algorithm
        if getattr(args, "player", None):
            abstraction["player"] = args.player
        if abstraction != config.abstraction.model_dump():
            updates["abstraction"] = abstraction
        if updates:
            config = cls._build({**config.model_dump(), **updates})
        return config.validated()

    def validated(self) -> "ExperimentConfig":
        if self.game not in GAMES:
            raise ConfigError(f"Unknown game {self.game!r}; choose from {sorted(GAMES)}")
        for algorithm in self.report_algorithms:
            if algorithm not in ALGORITHMS:
                raise ConfigError(f"Unknown report algorithm {algorithm!r}")
        if self.cfr.variant not in VARIANTS:
            raise ConfigError(f"Unknown CFR variant {self.cfr.variant!r}")
        return self

    def game_spec(self) -> GameSpec:
        return get_game(self.game, self.game_overrides)

    @property
    def abstraction_seed(self) -> int:
        if self.abstraction.seed is not None:
            return self.abstraction.seed
        return derive_seeds(self.seed, 1)[0]

    def report_seed_list(self) -> List[int]:
        """Seeds for the clustered algorithms in a report; the first is the abstraction seed."""
        return [self.abstraction_seed + i for i in range(self.report_seeds)]
