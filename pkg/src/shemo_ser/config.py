"""Declarative experiment configuration.

A run is described by one YAML (or JSON) document with the sections
``corpus``, ``preprocessing``, ``extractor``, ``model``, ``training`` and
``split``, plus top-level ``output_dir``, ``cache_dir``, ``seed`` and
``workers``. Missing fields take the defaults below; unknown fields are
rejected. The resolved configuration is written next to the outputs as
``config.snapshot`` and is enough on its own to repeat the run.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from shemo_ser.corpus.audio import TARGET_SECONDS, TARGET_SR
from shemo_ser.corpus.manifest import LABEL_RULES
from shemo_ser.features.cache import CACHE_ENV
from shemo_ser.features.transforms import INTERPOLATIONS
from shemo_ser.models.base import ModelSpec, ModelSpecError
from shemo_ser.training import TrainConfig

SNAPSHOT_NAME = "config.snapshot"


class ConfigError(ValueError):
    pass


@dataclass
class CorpusSection:
    root: str | None = None
    label_rule: str = "shemo"
    synthetic: bool = False
    n_per_class: int = 10
    synth_seed: int = 7
    synth_sample_rate: int = 44100


@dataclass
class PreprocessingSection:
    target_sr: int = TARGET_SR
    target_seconds: float = TARGET_SECONDS


@dataclass
class ExtractorSection:
    kind: str = "reference"
    artifact_path: str | None = None
    layer_index: int = 0
    seed: int = 0


@dataclass
class ModelSection:
    family: str = "proposed-cnn"
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    interpolation: str = "bilinear"


@dataclass
class SplitSection:
    ratios: list[float] = field(default_factory=lambda: [0.8, 0.1, 0.1])
    seed: int = 42
    speaker_independent: bool = False


@dataclass
class ExperimentConfig:
    corpus: CorpusSection = field(default_factory=CorpusSection)
    preprocessing: PreprocessingSection = field(default_factory=PreprocessingSection)
    extractor: ExtractorSection = field(default_factory=ExtractorSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: dict[str, Any] = field(default_factory=dict)
    split: SplitSection = field(default_factory=SplitSection)
    output_dir: str = "runs/default"
    cache_dir: str | None = None
    seed: int = 0
    workers: int = 1

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def feature_cache_dir(self) -> Path:
        """``$SER_CACHE_DIR`` beats the config value, which beats ``<output_dir>/features``."""
        env = os.environ.get(CACHE_ENV)
        if env:
            return Path(env)
        return Path(self.cache_dir) if self.cache_dir else self.out / "features"

    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.model.family, dict(self.model.hyperparameters))

    def train_config(self) -> TrainConfig:
        return TrainConfig.for_family(self.model.family, **{**self.training, "seed": self.seed})

    def validate(self) -> None:
        c = self.corpus
        if not c.synthetic and not c.root:
            raise ConfigError("corpus.root is required unless corpus.synthetic is true")
        if c.label_rule not in LABEL_RULES:
            raise ConfigError(f"corpus.label_rule must be one of {sorted(LABEL_RULES)}, got {c.label_rule!r}")
        if c.n_per_class < 1:
            raise ConfigError(f"corpus.n_per_class must be >= 1, got {c.n_per_class}")
        p = self.preprocessing
        if p.target_sr != TARGET_SR or float(p.target_seconds) != TARGET_SECONDS:
            raise ConfigError(
                f"preprocessing is fixed at {TARGET_SR} Hz / {TARGET_SECONDS} s, got {p.target_sr} Hz / {p.target_seconds} s"
            )
        e = self.extractor
        if e.kind not in ("reference", "synthetic"):
            raise ConfigError(f"extractor.kind must be 'reference' or 'synthetic', got {e.kind!r}")
        if e.kind == "reference" and not e.artifact_path:
            raise ConfigError("extractor.artifact_path is required for the reference extractor")
        if e.layer_index < 0:
            raise ConfigError(f"extractor.layer_index must be >= 0, got {e.layer_index}")
        if self.model.interpolation not in INTERPOLATIONS:
            raise ConfigError(f"model.interpolation must be one of {INTERPOLATIONS}, got {self.model.interpolation!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        try:
            self.model_spec()
            self.train_config()
        except (ModelSpecError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        r = self.split.ratios
        if len(r) != 3 or any(x < 0 for x in r) or abs(sum(r) - 1.0) > 1e-9 or r[0] == 0 or r[1] == 0:
            raise ConfigError(f"split.ratios must be 3 nonnegative values summing to 1 with train and val > 0, got {r}")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["training"] = self.train_config().to_dict()
        d["training"].pop("seed")  # always taken from the top-level seed
        d["model"]["hyperparameters"] = self.model_spec().hyperparameters
        return d

    def snapshot(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def write_snapshot(self, directory: str | os.PathLike) -> Path:
        from shemo_ser._io import atomic_write_text

        path = Path(directory) / SNAPSHOT_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_text(path, self.snapshot())
        return path


_SECTIONS = {
    "corpus": CorpusSection,
    "preprocessing": PreprocessingSection,
    "extractor": ExtractorSection,
    "model": ModelSection,
    "split": SplitSection,
}


def _section(cls, data: Any, name: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {k: v for k, v in data.items() if k not in _SECTIONS}
    for name, cls in _SECTIONS.items():
        kwargs[name] = _section(cls, data.get(name), name)
    if kwargs.get("training") is None:
        kwargs["training"] = {}
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str | os.PathLike, **overrides) -> ExperimentConfig:
    """Read a config file; non-``None`` keyword overrides (seed, workers,
    output_dir) replace the file's values."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return config_from_dict(data)


def hermetic_config(output_dir: str | os.PathLike, seed: int = 0, max_epochs: int = 60, **training) -> ExperimentConfig:
    """Synthetic corpus + synthetic extractor + width-reduced proposed CNN on a 40/10 split."""
    return config_from_dict(
        {
            "corpus": {"synthetic": True, "n_per_class": 10, "synth_seed": 7},
            "extractor": {"kind": "synthetic", "layer_index": 0, "seed": 0},
            "model": {"family": "proposed-cnn", "hyperparameters": {"width_divisor": 8}},
            "training": {"max_epochs": max_epochs, **training},
            "split": {"ratios": [0.8, 0.2, 0.0], "seed": 42},
            "output_dir": str(output_dir),
            "seed": seed,
        }
    )
