"""Waveform decoding, resampling and length normalization."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy
from scipy import signal
from scipy.io import wavfile

from shemo_ser._io import atomic_write

TARGET_SR = 16000
TARGET_SECONDS = 7.0
TARGET_SAMPLES = int(TARGET_SR * TARGET_SECONDS)

# Anti-aliasing filter: passband edge as a fraction of the lower Nyquist rate.
_CUTOFF_FRACTION = 0.95
_KAISER_BETA = 9.0
_TAPS_PER_PHASE = 40

RESAMPLER_ID = f"scipy.signal.resample_poly+firwin(kaiser={_KAISER_BETA},cut={_CUTOFF_FRACTION})/scipy-{scipy.__version__}"


class AudioDecodeError(Exception):
    """Raised when a file cannot be read as audio or holds no samples."""


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    label: str
    speaker_id: str
    source_path: str
    original_duration: float

    @property
    def is_normalized(self) -> bool:
        return self.sample_rate == TARGET_SR and self.samples.shape == (TARGET_SAMPLES,)


def decode_wav(path: str | os.PathLike) -> tuple[np.ndarray, int]:
    """Read a WAV file as mono float32 in [-1, 1].

    Integer PCM is scaled by its full-scale value; multichannel audio is
    averaged down to one channel.
    """
    try:
        sr, data = wavfile.read(os.fspath(path))
    except (ValueError, OSError, EOFError) as exc:
        raise AudioDecodeError(f"{path}: {exc}") from exc
    if data.dtype == np.uint8:
        x = (data.astype(np.float32) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.integer):
        x = data.astype(np.float32) / float(-np.iinfo(data.dtype).min)
    else:
        x = data.astype(np.float32)
    if x.ndim == 2:
        x = x.mean(axis=1, dtype=np.float32)
    if x.size == 0:
        raise AudioDecodeError(f"{path}: zero-length audio")
    if not np.all(np.isfinite(x)):
        raise AudioDecodeError(f"{path}: non-finite samples")
    return x, int(sr)


def write_wav(path: str | os.PathLike, samples: np.ndarray, sample_rate: int) -> None:
    """Write float samples as 16-bit PCM."""
    pcm = np.round(np.clip(samples, -1.0, 1.0) * 32767.0).astype("<i2")
    wavfile.write(os.fspath(path), sample_rate, pcm)


@lru_cache(maxsize=16)
def _lowpass(up: int, down: int, src_sr: int, dst_sr: int) -> np.ndarray:
    n_taps = 2 * _TAPS_PER_PHASE * max(up, down) + 1
    nyq_up = src_sr * up / 2.0
    cutoff = _CUTOFF_FRACTION * min(src_sr, dst_sr) / 2.0
    return signal.firwin(n_taps, cutoff / nyq_up, window=("kaiser", _KAISER_BETA))


def resample(x: np.ndarray, src_sr: int, dst_sr: int = TARGET_SR) -> np.ndarray:
    if src_sr <= 0:
        raise ValueError(f"invalid sample rate {src_sr}")
    if src_sr == dst_sr:
        return x
    g = math.gcd(src_sr, dst_sr)
    up, down = dst_sr // g, src_sr // g
    y = signal.resample_poly(x.astype(np.float64), up, down, window=_lowpass(up, down, src_sr, dst_sr))
    return y.astype(np.float32)


def fix_length(x: np.ndarray, n: int = TARGET_SAMPLES) -> np.ndarray:
    """Keep the first ``n`` samples, zero-padding at the end when short."""
    if x.shape[0] >= n:
        return x[:n]
    out = np.zeros(n, dtype=np.float32)
    out[: x.shape[0]] = x
    return out


def normalize_samples(x: np.ndarray, sample_rate: int) -> np.ndarray:
    """Resample to 16 kHz and fix the length to exactly seven seconds."""
    if x.size == 0:
        raise AudioDecodeError("zero-length audio")
    y = resample(np.asarray(x, dtype=np.float32), sample_rate, TARGET_SR)
    y = fix_length(y, TARGET_SAMPLES)
    return np.clip(y, -1.0, 1.0).astype(np.float32, copy=False)


def normalize_clip(clip: AudioClip) -> AudioClip:
    if clip.is_normalized:
        return clip
    return AudioClip(
        samples=normalize_samples(clip.samples, clip.sample_rate),
        sample_rate=TARGET_SR,
        label=clip.label,
        speaker_id=clip.speaker_id,
        source_path=clip.source_path,
        original_duration=clip.original_duration,
    )


def load_and_normalize(entry, base_dir: str | os.PathLike | None = None) -> AudioClip:
    """Decode a manifest entry and normalize it to 16 kHz / 112000 samples."""
    path = Path(entry.path)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    x, sr = decode_wav(path)
    return AudioClip(
        samples=normalize_samples(x, sr),
        sample_rate=TARGET_SR,
        label=entry.label,
        speaker_id=entry.speaker_id,
        source_path=entry.path,
        original_duration=x.shape[0] / sr,
    )


# Normalized-audio cache: <stem>.f32 (raw little-endian float32) + <stem>.json.


def save_normalized(clip: AudioClip, directory: str | os.PathLike, stem: str) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    raw = directory / f"{stem}.f32"
    atomic_write(raw, clip.samples.astype("<f4").tobytes())
    sidecar = {
        "sample_rate": clip.sample_rate,
        "n_samples": int(clip.samples.shape[0]),
        "label": clip.label,
        "speaker": clip.speaker_id,
        "source": clip.source_path,
        "original_duration": clip.original_duration,
        "resampler": RESAMPLER_ID,
    }
    atomic_write(directory / f"{stem}.json", json.dumps(sidecar, indent=2, sort_keys=True).encode())
    return raw


def load_normalized(directory: str | os.PathLike, stem: str) -> AudioClip:
    directory = Path(directory)
    meta = json.loads((directory / f"{stem}.json").read_text())
    samples = np.fromfile(directory / f"{stem}.f32", dtype="<f4")
    if samples.shape[0] != meta["n_samples"]:
        raise AudioDecodeError(f"{stem}: cached audio truncated ({samples.shape[0]} of {meta['n_samples']} samples)")
    return AudioClip(
        samples=samples.astype(np.float32),
        sample_rate=int(meta["sample_rate"]),
        label=meta["label"],
        speaker_id=meta["speaker"],
        source_path=meta["source"],
        original_duration=float(meta["original_duration"]),
    )
