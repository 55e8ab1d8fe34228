"""Run configuration: defaults, validation, and (de)serialization.

Every default mirrors the published operating point (n-grams 3..6 capped
at 500k, the 99.9th selection percentile, cone multiplier 2.0, six
bootstrap rounds, 10% amplification). Randomness seeds are explicit
config values, never wall-clock derived. Unknown keys are rejected so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any, Optional

from .embeddings import DEFAULT_DISTANCE_MULTIPLIER, SEED_DESIRE_VERBS
from .errors import ConfigurationError
from .recurrent import ModelConfig

ENV_PREFIX = "ABINTENT_"
_ENV_PATH_KEYS = ("corpus", "parses", "embeddings", "output_dir", "abuse_dir")


@dataclass
class PathsConfig:
    corpus: str = ""
    parses: str = ""  # empty: fall back to the heuristic parser
    embeddings: str = ""
    abuse_dir: str = ""  # directory holding sources.json and data files
    output_dir: str = "out"


@dataclass
class NgramSection:
    n_min: int = 3
    n_max: int = 6
    cap: int = 500_000
    percentile: float = 99.9
    smoothing: Optional[float] = None  # None: 1/(N_pos + N_neg)

    def validate(self) -> None:
        if not 1 <= self.n_min <= self.n_max:
            raise ConfigurationError("require 1 <= n_min <= n_max")
        if self.cap < 1:
            raise ConfigurationError("cap must be positive")
        if not 50.0 < self.percentile <= 100.0:
            raise ConfigurationError("percentile must be in (50, 100]")
        if self.smoothing is not None and self.smoothing < 0:
            raise ConfigurationError("smoothing must be non-negative")


@dataclass
class ConeSection:
    seeds: list[str] = field(default_factory=lambda: list(SEED_DESIRE_VERBS))
    multiplier: float = DEFAULT_DISTANCE_MULTIPLIER

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigurationError("cone seeds must be non-empty")
        if self.multiplier <= 0:
            raise ConfigurationError("cone multiplier must be positive")


@dataclass
class BootstrapSection:
    rounds: int = 6
    amplify_threshold: float = 0.9
    amplify_factor: float = 0.10
    hard_proposal_threshold: float = 0.99

    def validate(self) -> None:
        if self.rounds < 1:
            raise ConfigurationError("rounds must be >= 1")
        if not 0.5 < self.amplify_threshold <= 1.0:
            raise ConfigurationError("amplify_threshold must be in (0.5, 1]")
        if not 0.0 <= self.amplify_factor <= 1.0:
            raise ConfigurationError("amplify_factor must be in [0, 1]")
        if not 0.5 < self.hard_proposal_threshold <= 1.0:
            raise ConfigurationError("hard_proposal_threshold must be in (0.5, 1]")


@dataclass
class SeedsSection:
    shuffle: int = 13
    sampling: int = 17
    weights: int = 29


@dataclass
class ScoreSection:
    top_k: int = 50
    window: int = 3

    def validate(self) -> None:
        if self.window < 1:
            raise ConfigurationError("window must be >= 1")


@dataclass
class RunConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    ngram: NgramSection = field(default_factory=NgramSection)
    cone: ConeSection = field(default_factory=ConeSection)
    model: ModelConfig = field(default_factory=ModelConfig)
    bootstrap: BootstrapSection = field(default_factory=BootstrapSection)
    seeds: SeedsSection = field(default_factory=SeedsSection)
    score: ScoreSection = field(default_factory=ScoreSection)

    def validate(self) -> None:
        self.ngram.validate()
        self.cone.validate()
        self.bootstrap.validate()
        self.score.validate()
        # ModelConfig validates in __post_init__

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_NESTED_SECTIONS: dict[type, dict[str, type]] = {
    RunConfig: {
        "paths": PathsConfig,
        "ngram": NgramSection,
        "cone": ConeSection,
        "model": ModelConfig,
        "bootstrap": BootstrapSection,
        "seeds": SeedsSection,
        "score": ScoreSection,
    },
}


def _build(cls: type, data: dict, context: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys under {context}: {sorted(unknown)}")
    nested = _NESTED_SECTIONS.get(cls, {})
    kwargs: dict[str, Any] = {}
    for name, value in data.items():
        if name in nested:
            if not isinstance(value, dict):
                raise ConfigurationError(f"{context}.{name} must be a mapping")
            kwargs[name] = _build(nested[name], value, f"{context}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ConfigurationError) as exc:
        raise ConfigurationError(f"invalid config under {context}: {exc}") from exc


def _apply_env_overrides(config: RunConfig) -> None:
    for key in _ENV_PATH_KEYS:
        value = os.environ.get(ENV_PREFIX + key.upper())
        if value:
            setattr(config.paths, key, value)


def load_config(path: Optional[str] = None) -> RunConfig:
    """Load a JSON config; an empty or missing-body file means defaults.

    Unknown keys raise; section invariants are validated; path fields
    accept ABINTENT_* environment overrides.
    """
    data: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            body = fh.read().strip()
        if body:
            data = json.loads(body)
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: config root must be an object")
    config = _build(RunConfig, data, "config")
    _apply_env_overrides(config)
    config.validate()
    return config


def save_config(config: RunConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
