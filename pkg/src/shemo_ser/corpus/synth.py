"""Hermetic tonal corpus with one fundamental frequency per emotion class."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from shemo_ser.corpus.audio import write_wav
from shemo_ser.corpus.labels import EmotionLabel
from shemo_ser.corpus.manifest import CorpusManifest, ManifestEntry

CLASS_FUNDAMENTALS_HZ = {
    EmotionLabel.ANGER: 200.0,
    EmotionLabel.NEUTRAL: 400.0,
    EmotionLabel.SADNESS: 800.0,
    EmotionLabel.SURPRISE: 1600.0,
    EmotionLabel.HAPPINESS: 3200.0,
}
HARMONIC_GAINS = (1.0, 0.4, 0.2)
HARMONIC_CEILING_HZ = 7000.0
NOISE_STD = 0.01
N_SPEAKERS = 5


def synth_tone(f0: float, duration: float, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    amp = rng.uniform(0.3, 0.6)
    x = np.zeros(n)
    for k, gain in enumerate(HARMONIC_GAINS, start=1):
        if k * f0 < HARMONIC_CEILING_HZ:
            x += gain * np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi))
    x *= amp / sum(HARMONIC_GAINS)
    ramp = min(n // 2, int(0.01 * sample_rate))
    if ramp:
        env = np.linspace(0.0, 1.0, ramp)
        x[:ramp] *= env
        x[-ramp:] *= env[::-1]
    x += rng.normal(0.0, NOISE_STD, n)
    return np.clip(x, -1.0, 1.0).astype(np.float32)


def synth_corpus(
    n_per_class: int,
    seed: int,
    out_dir: str | os.PathLike,
    sample_rate: int = 44100,
    min_seconds: float = 1.0,
    max_seconds: float = 8.0,
) -> CorpusManifest:
    """Write ``5 * n_per_class`` WAV files under ``out_dir/<label>/`` and
    return their manifest. Output is a pure function of the arguments."""
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    entries = []
    for label in EmotionLabel:
        (out / label.tag).mkdir(parents=True, exist_ok=True)
        for k in range(n_per_class):
            duration = float(rng.uniform(min_seconds, max_seconds))
            x = synth_tone(CLASS_FUNDAMENTALS_HZ[label], duration, sample_rate, rng)
            speaker = f"spk{k % N_SPEAKERS:02d}"
            rel = f"{label.tag}/{speaker}_{label.tag}_{k:03d}.wav"
            write_wav(out / rel, x, sample_rate)
            entries.append(ManifestEntry(rel, label.tag, speaker, x.shape[0] / sample_rate))
    return CorpusManifest(entries, base_dir=str(out))
