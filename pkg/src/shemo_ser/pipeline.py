"""Pipeline stages behind the CLI.

Every stage takes an :class:`ExperimentConfig` and reads or writes a fixed
layout under ``output_dir``::

    corpus/            synthetic WAVs (synthetic corpora only)
    manifest.tsv       filtered corpus manifest
    audio/             normalized 16 kHz clips
    features/          feature cache (unless SER_CACHE_DIR / cache_dir is set)
    split.json
    checkpoints/       best.ckpt, last.ckpt, history.jsonl, config.snapshot
    report/            metrics and figures
    config.snapshot
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from shemo_ser._io import atomic_write_text
from shemo_ser.config import ConfigError, ExperimentConfig
from shemo_ser.corpus.audio import (
    AudioClip,
    decode_wav,
    load_and_normalize,
    load_normalized,
    normalize_clip,
    save_normalized,
)
from shemo_ser.corpus.labels import TARGET_TAGS
from shemo_ser.corpus.manifest import CorpusManifest, filter_fear, read_manifest, scan_corpus, write_manifest
from shemo_ser.corpus.split import DataSplit, make_split
from shemo_ser.corpus.synth import synth_corpus
from shemo_ser.evaluation.metrics import EvaluationReport, evaluate
from shemo_ser.evaluation.report import METRICS_JSON, emit_report
from shemo_ser.features.cache import FeatureCache, cache_key
from shemo_ser.features.extractors import ExtractorError, make_extractor
from shemo_ser.features.transforms import mean_pool, resize_to_square
from shemo_ser.features.types import FeatureMap, PooledVector, ResizedMap
from shemo_ser.models import checkpoint
from shemo_ser.models.base import ModelSpec, TrainedModel, build, encode_labels
from shemo_ser.training import ArrayDataset, TrainingHistory, train

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.tsv"
SPLIT_NAME = "split.json"
AUDIO_DIR = "audio"
CHECKPOINT_DIR = "checkpoints"
REPORT_DIR = "report"


class DataError(Exception):
    """Missing or inconsistent pipeline inputs (as opposed to bad configuration)."""


def clip_stem(ref: str) -> str:
    """Filesystem-safe, collision-free name for a manifest path."""
    name = Path(ref).with_suffix("").as_posix().replace("/", "__")
    return f"{name}-{hashlib.sha1(ref.encode()).hexdigest()[:8]}"


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def load_manifest(cfg: ExperimentConfig) -> CorpusManifest:
    path = cfg.out / MANIFEST_NAME
    if not path.exists():
        raise DataError(f"{path} not found; run 'prepare' first")
    return read_manifest(path)


# -- prepare -----------------------------------------------------------------


def prepare(cfg: ExperimentConfig) -> CorpusManifest:
    """Scan (or synthesize) the corpus, drop fear, normalize every clip."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_snapshot(out)
    c = cfg.corpus
    if c.synthetic:
        manifest = synth_corpus(c.n_per_class, c.synth_seed, out / "corpus", sample_rate=c.synth_sample_rate)
    else:
        manifest = scan_corpus(c.root, label_rule=c.label_rule, workers=cfg.workers)
    for w in manifest.warnings:
        logger.warning("%s", w)
    manifest = filter_fear(manifest)
    manifest.validate()
    audio_dir = out / AUDIO_DIR

    def one(entry):
        clip = load_and_normalize(entry, manifest.base_dir)
        save_normalized(clip, audio_dir, clip_stem(entry.path))

    _map(one, manifest.entries, cfg.workers)
    write_manifest(manifest, out / MANIFEST_NAME)
    logger.info("prepared %d clips: %s", len(manifest), manifest.label_counts())
    return read_manifest(out / MANIFEST_NAME)


def load_clip(cfg: ExperimentConfig, manifest: CorpusManifest, index: int) -> AudioClip:
    entry = manifest.entries[index]
    try:
        return load_normalized(cfg.out / AUDIO_DIR, clip_stem(entry.path))
    except FileNotFoundError:
        return load_and_normalize(entry, manifest.base_dir)


# -- extract -----------------------------------------------------------------


@dataclass
class ExtractStats:
    extracted: int
    cached: int

    @property
    def total(self) -> int:
        return self.extracted + self.cached


def extractor_for(kind: str, artifact_path: str | None, seed: int, layer_index: int):
    try:
        extractor = make_extractor(kind, artifact_path, seed)
    except (ExtractorError, OSError) as exc:
        raise ConfigError(f"cannot load the {kind} extractor: {exc}") from exc
    if not 0 <= layer_index < extractor.n_layers:
        raise ConfigError(
            f"extractor.layer_index {layer_index} out of range: must satisfy 0 <= layer_index < {extractor.n_layers}"
        )
    return extractor


def make_config_extractor(cfg: ExperimentConfig):
    e = cfg.extractor
    return extractor_for(e.kind, e.artifact_path, e.seed, e.layer_index)


def extract(cfg: ExperimentConfig, extractor=None) -> ExtractStats:
    """Fill the feature cache with one layer map per clip; cached maps are skipped."""
    manifest = load_manifest(cfg)
    extractor = extractor or make_config_extractor(cfg)
    layer = cfg.extractor.layer_index
    cache = FeatureCache(cfg.feature_cache_dir)

    def one(i: int) -> bool:
        key = cache_key(manifest.entries[i].path, extractor.extractor_id, layer, "map")
        if cache.has(key):
            return False
        fmap = extractor.extract(load_clip(cfg, manifest, i), layer)
        fmap.clip_ref = manifest.entries[i].path
        cache.put(fmap)
        return True

    fresh = _map(one, range(len(manifest)), cfg.workers)
    stats = ExtractStats(sum(fresh), len(fresh) - sum(fresh))
    logger.info("extracted %d feature maps, %d already cached", stats.extracted, stats.cached)
    return stats


# -- model inputs ------------------------------------------------------------


def transform_meta(spec: ModelSpec, interpolation: str) -> dict:
    if spec.input_kind == "vector":
        return {"kind": "mean-over-frames"}
    return {"kind": "resize", "size": spec.input_size, "interpolation": interpolation}


def to_input(fmap: FeatureMap, transform: dict) -> PooledVector | ResizedMap:
    if transform["kind"] == "mean-over-frames":
        return mean_pool(fmap)
    return resize_to_square(fmap, transform["size"], transform["interpolation"])


def load_inputs(cfg: ExperimentConfig, manifest: CorpusManifest, indices, extractor_id: str, transform: dict) -> np.ndarray:
    """Stack model inputs for ``indices``; derived inputs are cached beside the maps."""
    cache = FeatureCache(cfg.feature_cache_dir)
    layer = cfg.extractor.layer_index
    rows = []
    for i in indices:
        ref = manifest.entries[i].path
        map_key = cache_key(ref, extractor_id, layer, "map")
        if not cache.has(map_key):
            raise DataError(f"no cached features for {ref}; run 'extract' first")
        fmap = cache.get(map_key)
        derived = to_input(fmap, transform)
        key = cache.key_for(derived)
        if cache.has(key):
            rows.append(cache.get_array(key).reshape(derived.values.shape))
        else:
            cache.put(derived)
            rows.append(derived.values)
    if not rows:
        return np.zeros((0,), dtype=np.float32)
    return np.stack(rows).astype(np.float32)


# -- train -------------------------------------------------------------------


def get_split(cfg: ExperimentConfig, manifest: CorpusManifest) -> DataSplit:
    s = cfg.split
    split = make_split(manifest, tuple(s.ratios), s.seed, s.speaker_independent)
    atomic_write_text(cfg.out / SPLIT_NAME, json.dumps(split.to_dict(), indent=2, sort_keys=True))
    return split


def _extractor_meta(cfg: ExperimentConfig, extractor) -> dict:
    e = cfg.extractor
    return {
        "kind": e.kind,
        "extractor_id": extractor.extractor_id,
        "layer_index": e.layer_index,
        "artifact_path": e.artifact_path,
        "seed": e.seed,
    }


def train_stage(cfg: ExperimentConfig, extractor=None) -> tuple[TrainedModel, TrainingHistory]:
    manifest = load_manifest(cfg)
    split = get_split(cfg, manifest)
    extractor = extractor or make_config_extractor(cfg)
    spec = cfg.model_spec()
    transform = transform_meta(spec, cfg.model.interpolation)
    labels = [e.label for e in manifest.entries]

    def dataset(indices):
        x = load_inputs(cfg, manifest, indices, extractor.extractor_id, transform)
        return ArrayDataset(x, encode_labels([labels[i] for i in indices], TARGET_TAGS))

    train_set, val_set = dataset(split.train), dataset(split.val)
    metadata = {
        "extractor": _extractor_meta(cfg, extractor),
        "transform": transform,
        "split": split.to_dict(),
        "config": cfg.to_dict(),
    }
    ckpt_dir = cfg.out / CHECKPOINT_DIR
    cfg.write_snapshot(ckpt_dir)
    model = build(spec, seed=cfg.seed)
    trained, history = train(
        model, train_set, val_set, cfg.train_config(), spec, TARGET_TAGS, ckpt_dir, metadata
    )
    return trained, history


# -- evaluate / report -------------------------------------------------------


def _pick_split(split: DataSplit, name: str) -> tuple[str, list[int]]:
    if name == "auto":
        name = "test" if split.test else "val"
    parts = split.parts()
    if name not in parts:
        raise ConfigError(f"unknown split {name!r}; expected one of {sorted(parts)} or 'auto'")
    if not parts[name]:
        raise DataError(f"the {name} split is empty")
    return name, parts[name]


def evaluate_stage(cfg: ExperimentConfig, split_name: str = "auto", checkpoint_path=None) -> EvaluationReport:
    ckpt_dir = cfg.out / CHECKPOINT_DIR
    path = Path(checkpoint_path) if checkpoint_path else ckpt_dir / "best.ckpt"
    if not path.exists():
        raise DataError(f"{path} not found; run 'train' first")
    model = checkpoint.load(path)
    manifest = load_manifest(cfg)
    split = DataSplit.from_dict(model.metadata["split"]) if "split" in model.metadata else get_split(cfg, manifest)
    name, indices = _pick_split(split, split_name)
    meta = model.metadata.get("extractor", {})
    extractor_id = meta.get("extractor_id") or make_config_extractor(cfg).extractor_id
    transform = model.metadata.get("transform") or transform_meta(model.spec, cfg.model.interpolation)
    x = load_inputs(cfg, manifest, indices, extractor_id, transform)
    report = evaluate(model, x, [manifest.entries[i].label for i in indices], split=name)
    history_path = ckpt_dir / "history.jsonl"
    history = TrainingHistory.read(history_path) if history_path.exists() else None
    emit_report(report, history, cfg.out / REPORT_DIR, title=f"{model.spec.family} ({name})")
    return report


def report_stage(cfg: ExperimentConfig) -> list[Path]:
    """Re-render the report directory from the saved metrics and history."""
    out = cfg.out / REPORT_DIR
    metrics = out / METRICS_JSON
    if not metrics.exists():
        raise DataError(f"{metrics} not found; run 'evaluate' first")
    report = EvaluationReport.from_dict(json.loads(metrics.read_text()))
    history_path = cfg.out / CHECKPOINT_DIR / "history.jsonl"
    history = TrainingHistory.read(history_path) if history_path.exists() else None
    return emit_report(report, history, out, title=report.split)


# -- predict -----------------------------------------------------------------


def predict_files(checkpoint_path, audio_paths) -> list[dict]:
    model = checkpoint.load(checkpoint_path)
    meta = model.metadata.get("extractor")
    if not meta or "transform" not in model.metadata:
        raise DataError(f"{checkpoint_path}: checkpoint lacks extractor/transform provenance")
    extractor = extractor_for(meta["kind"], meta.get("artifact_path"), meta.get("seed", 0), meta["layer_index"])
    if extractor.extractor_id != meta["extractor_id"]:
        raise DataError(
            f"extractor mismatch: checkpoint was trained on {meta['extractor_id']}, loaded {extractor.extractor_id}"
        )
    results = []
    for p in audio_paths:
        x, sr = decode_wav(p)
        clip = normalize_clip(AudioClip(x, sr, None, None, str(p), x.shape[0] / sr))
        fmap = extractor.extract(clip, meta["layer_index"])
        proba = model.predict_proba(to_input(fmap, model.metadata["transform"]).values[None])[0]
        results.append(
            {
                "path": str(p),
                "label": model.label_names[int(proba.argmax())],
                "probabilities": {t: float(v) for t, v in zip(model.label_names, proba)},
            }
        )
    return results


def run_all(cfg: ExperimentConfig, split_name: str = "auto") -> EvaluationReport:
    prepare(cfg)
    extract(cfg)
    train_stage(cfg)
    return evaluate_stage(cfg, split_name)
