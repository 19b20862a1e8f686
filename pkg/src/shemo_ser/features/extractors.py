"""Feature extractors: a seeded synthetic front-end and a wav2vec2/XLSR adapter."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Protocol

import numpy as np

from shemo_ser.corpus.audio import TARGET_SAMPLES, TARGET_SR, AudioClip
from shemo_ser.features.types import FeatureMap

# Frame count for a 7 s clip under a 400-sample window / 320-sample hop front-end.
REFERENCE_FRAMES = 349
REFERENCE_CHANNELS = 1024


class ExtractorError(Exception):
    pass


class FeatureExtractor(Protocol):
    extractor_id: str
    n_layers: int
    channels: int

    def extract(self, clip: AudioClip, layer_index: int) -> FeatureMap: ...


def _check_input(clip: AudioClip, layer_index: int, n_layers: int) -> None:
    if clip.sample_rate != TARGET_SR:
        raise ExtractorError(f"{clip.source_path}: expected a {TARGET_SR} Hz clip, got {clip.sample_rate} Hz")
    if clip.samples.ndim != 1 or not np.all(np.isfinite(clip.samples)):
        raise ExtractorError(f"{clip.source_path}: samples must be a finite 1D array")
    if not 0 <= layer_index < n_layers:
        raise ExtractorError(f"layer_index {layer_index} out of range: must satisfy 0 <= layer_index < {n_layers}")


def frame_count(n_samples: int, window: int = 400, hop: int = 320) -> int:
    return 0 if n_samples < window else (n_samples - window) // hop + 1


class SyntheticExtractor:
    """Deterministic stand-in for a pretrained speech encoder.

    Each 400-sample window (hop 320) is Hann-weighted, its log-magnitude
    spectrum is taken, and a fixed seeded random projection maps the 201
    bins onto ``channels`` features plus a bias. No pretrained artifact is
    needed, and tones at different pitches stay separable.
    """

    n_layers = 1

    def __init__(self, seed: int = 0, channels: int = REFERENCE_CHANNELS, window: int = 400, hop: int = 320):
        self.seed = seed
        self.channels = channels
        self.window = window
        self.hop = hop
        rng = np.random.default_rng(seed)
        n_bins = window // 2 + 1
        self.projection = (rng.standard_normal((n_bins, channels)) / np.sqrt(n_bins)).astype(np.float32)
        self.bias = rng.uniform(-0.1, 0.1, channels).astype(np.float32)
        self._taper = np.hanning(window).astype(np.float32)
        self.extractor_id = f"synthetic-v1:seed={seed}:win={window}:hop={hop}:ch={channels}"

    def extract(self, clip: AudioClip, layer_index: int = 0) -> FeatureMap:
        _check_input(clip, layer_index, self.n_layers)
        x = np.asarray(clip.samples, dtype=np.float32)
        n = frame_count(x.shape[0], self.window, self.hop)
        if n == 0:
            raise ExtractorError(f"{clip.source_path}: clip shorter than one {self.window}-sample window")
        frames = np.lib.stride_tricks.sliding_window_view(x, self.window)[:: self.hop][:n]
        spectrum = np.log1p(np.abs(np.fft.rfft(frames * self._taper, axis=1)))
        values = (spectrum.astype(np.float32) @ self.projection + self.bias).astype(np.float32)
        return FeatureMap(values, layer_index, self.extractor_id, clip.source_path)


def artifact_digest(path: str | os.PathLike) -> str:
    """SHA-256 over every file of a model artifact (file or directory)."""
    root = Path(path)
    files = sorted(p for p in root.rglob("*") if p.is_file()) if root.is_dir() else [root]
    h = hashlib.sha256()
    for f in files:
        h.update(f.relative_to(root).as_posix().encode() if root.is_dir() else f.name.encode())
        with open(f, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()


class Wav2Vec2Extractor:
    """Hidden states of a local wav2vec2-family checkpoint (e.g. XLSR-53).

    Index 0 is the transformer input (projected front-end features with the
    positional convolution added); indices 1..N are the transformer layer
    outputs.
    The model runs frozen in eval mode.
    """

    def __init__(self, artifact_path: str | os.PathLike, device: str = "cpu"):
        path = Path(artifact_path)
        if not path.exists():
            raise ExtractorError(f"extractor artifact not found: {path}")
        try:
            import torch
            from transformers import Wav2Vec2Model
        except ImportError as exc:
            raise ExtractorError("the reference extractor needs the 'transformers' package") from exc
        try:
            self.model = Wav2Vec2Model.from_pretrained(str(path)).to(device).eval()
        except (OSError, ValueError) as exc:
            raise ExtractorError(f"cannot load extractor artifact {path}: {exc}") from exc
        self._torch = torch
        self.device = device
        self.n_layers = self.model.config.num_hidden_layers + 1
        self.channels = self.model.config.hidden_size
        self.digest = artifact_digest(path)
        self.extractor_id = f"wav2vec2:{path.name}:sha256={self.digest[:16]}"

    def extract(self, clip: AudioClip, layer_index: int = 0) -> FeatureMap:
        _check_input(clip, layer_index, self.n_layers)
        torch = self._torch
        x = clip.samples.astype(np.float32)
        x = (x - x.mean()) / np.sqrt(x.var() + 1e-7)
        with torch.no_grad():
            out = self.model(torch.from_numpy(x)[None].to(self.device), output_hidden_states=True)
        values = out.hidden_states[layer_index][0].cpu().numpy().astype(np.float32)
        if clip.samples.shape[0] == TARGET_SAMPLES and values.shape[0] != REFERENCE_FRAMES:
            raise ExtractorError(
                f"frame-count law violated: {TARGET_SAMPLES} samples gave {values.shape[0]} frames, expected {REFERENCE_FRAMES}"
            )
        if not np.all(np.isfinite(values)):
            raise ExtractorError(f"{clip.source_path}: extractor produced non-finite features")
        return FeatureMap(values, layer_index, self.extractor_id, clip.source_path)


def make_extractor(kind: str, artifact_path: str | None = None, seed: int = 0) -> FeatureExtractor:
    if kind == "synthetic":
        return SyntheticExtractor(seed=seed)
    if kind == "reference":
        if not artifact_path:
            raise ExtractorError("the reference extractor needs an artifact path")
        return Wav2Vec2Extractor(artifact_path)
    raise ExtractorError(f"unknown extractor kind {kind!r}; expected 'reference' or 'synthetic'")
