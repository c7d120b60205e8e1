"""Experiment configuration: schema, loading, and the binding digest.

Configs are committed files, so credentials never appear inline; any
authenticated provider names an environment variable instead. The digest
hashes every semantic field (everything that changes results) and binds run
records to the configuration that produced them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

VALID_MODELS = ("knn", "wknn", "lr", "llm", "llm_weighted", "llm_zeroshot", "router")
VALID_PROMPT_MODES = ("plain", "weighted", "zeroshot")

_MODEL_TAG_BY_MODE = {"plain": "llm", "weighted": "llm_weighted", "zeroshot": "llm_zeroshot"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    path: str
    format: str = "jsonl"  # csv | jsonl
    labels: tuple[str, ...] | None = None
    task_description: str = "text classification"


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "hash"  # hash | remote
    dims: int = 64
    seed: int = 0
    url: str | None = None
    provider_id: str | None = None
    auth_env: str | None = None  # environment variable NAME, never a secret


@dataclass(frozen=True)
class LlmConfig:
    kind: str = "scripted"  # scripted | http
    behavior: str = "majority_echo"  # scripted behavior spec, see runner
    model: str = "mock"
    url: str | None = None
    auth_env: str | None = None
    max_attempts: int = 5
    rate_per_s: float | None = None


@dataclass(frozen=True)
class AnnotatorConfig:
    kind: str = "scripted"  # scripted | http
    behavior: str = "overlap:0.5"
    model: str = "mock-annotator"
    url: str | None = None
    auth_env: str | None = None

    @property
    def annotator_id(self) -> str:
        return f"llm:{self.model}"


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetConfig, ...]
    sample_n: int
    sample_seed: int = 0
    k_values: tuple[int, ...] = (1, 10, 20, 30)
    models: tuple[str, ...] = ("knn", "wknn", "lr")
    prompt_modes: tuple[str, ...] = ("plain",)
    annotators: tuple[AnnotatorConfig, ...] = ()
    router_threshold: float = 0.5
    router_knn_mode: str = "unweighted"
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    out_dir: str = "runs/default"
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.datasets:
            raise ConfigError("at least one dataset is required")
        if not self.k_values:
            raise ConfigError("k_values must be non-empty")
        if any(k < 1 for k in self.k_values):
            raise ConfigError(f"k_values must be positive, got {self.k_values}")
        if list(self.k_values) != sorted(set(self.k_values)):
            raise ConfigError(f"k_values must be strictly ascending, got {self.k_values}")
        if not self.models:
            raise ConfigError("at least one predictor is required")
        for m in self.models:
            if m not in VALID_MODELS:
                raise ConfigError(f"unknown model {m!r}; valid: {VALID_MODELS}")
        for mode in self.prompt_modes:
            if mode not in VALID_PROMPT_MODES:
                raise ConfigError(f"unknown prompt mode {mode!r}; valid: {VALID_PROMPT_MODES}")
        if self.sample_n < 1:
            raise ConfigError("sample_n must be at least 1")
        if self.router_knn_mode not in ("weighted", "unweighted"):
            raise ConfigError(
                f"router_knn_mode must be weighted or unweighted, got {self.router_knn_mode!r}"
            )
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate dataset names: {names}")

    def predictor_tags(self) -> tuple[str, ...]:
        """Expand the model list into concrete predictor tags.

        A bare "llm" entry runs once per configured prompt mode; explicit
        llm_weighted / llm_zeroshot entries are kept as-is.
        """
        tags: list[str] = []
        for m in self.models:
            if m == "llm":
                for mode in self.prompt_modes:
                    tag = _MODEL_TAG_BY_MODE[mode]
                    if tag not in tags:
                        tags.append(tag)
            elif m not in tags:
                tags.append(m)
        return tuple(tags)

    def needs_llm(self) -> bool:
        return any(t.startswith("llm") or t == "router" for t in self.predictor_tags())


def _tuplify(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _build_dataclass(cls: type, raw: dict[str, Any], where: str) -> Any:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**{k: _tuplify(v) for k, v in raw.items()})


def parse_config(raw: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    data = dict(raw)
    datasets = tuple(
        _build_dataclass(DatasetConfig, d, f"datasets[{i}]")
        for i, d in enumerate(data.pop("datasets", []))
    )
    annotators = tuple(
        _build_dataclass(AnnotatorConfig, a, f"annotators[{i}]")
        for i, a in enumerate(data.pop("annotators", []))
    )
    embedder = _build_dataclass(EmbedderConfig, data.pop("embedder", {}), "embedder")
    llm = _build_dataclass(LlmConfig, data.pop("llm", {}), "llm")
    data = {k: _tuplify(v) for k, v in data.items()}
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return ExperimentConfig(
        datasets=datasets, annotators=annotators, embedder=embedder, llm=llm, **data
    )


def load_config(
    path: str | Path, seed: int | None = None, out_dir: str | None = None
) -> ExperimentConfig:
    """Load a YAML or JSON config file; `seed` and `out_dir` override the
    file's values when given (the CLI's global flags)."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix in (".yaml", ".yml"):
        raw = yaml.safe_load(text)
    elif p.suffix == ".json":
        raw = json.loads(text)
    else:
        raise ConfigError(f"unsupported config extension {p.suffix!r} (use .yaml/.yml/.json)")
    config = parse_config(raw)
    if seed is not None:
        config = dataclasses.replace(config, sample_seed=seed)
    if out_dir is not None:
        config = dataclasses.replace(config, out_dir=out_dir)
    return config


# Fields that do not change results; they stay out of the digest so moving a
# run directory or resizing the pool never orphans existing records.
_NON_SEMANTIC_FIELDS = ("out_dir", "workers")


def config_digest(config: ExperimentConfig) -> str:
    payload = dataclasses.asdict(config)
    for name in _NON_SEMANTIC_FIELDS:
        payload.pop(name, None)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
