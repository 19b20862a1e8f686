"""Corpus manifests: scanning, fear filtering and the v1 text format."""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from shemo_ser._io import atomic_write_text
from shemo_ser.corpus.audio import AudioDecodeError, decode_wav
from shemo_ser.corpus.labels import FEAR, SHEMO_EMOTION_CODES, SHEMO_TAGS

logger = logging.getLogger(__name__)

MANIFEST_HEADER = "#ser-manifest v1"
FORMAT_VERSION = 1
AUDIO_SUFFIXES = (".wav",)


class ManifestError(Exception):
    pass


class NoAudioFoundError(ManifestError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    speaker_id: str
    duration_seconds: float


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    format_version: int = FORMAT_VERSION
    # Problems found while building the manifest; not persisted.
    warnings: list[str] = field(default_factory=list)
    # Directory that relative entry paths resolve against.
    base_dir: str | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def validate(self) -> None:
        seen: set[str] = set()
        for e in self.entries:
            if e.path in seen:
                raise ManifestError(f"duplicate path in manifest: {e.path}")
            seen.add(e.path)
            if e.label not in SHEMO_TAGS:
                raise ManifestError(f"{e.path}: unknown label {e.label!r}")
            if not e.duration_seconds > 0:
                raise ManifestError(f"{e.path}: non-positive duration {e.duration_seconds}")

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        if self.base_dir is not None and not p.is_absolute():
            return Path(self.base_dir) / p
        return p

    def label_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            counts[e.label] = counts.get(e.label, 0) + 1
        return counts


def shemo_rule(path: Path) -> tuple[str, str]:
    """Label and speaker from a ShEMO stem such as ``F01A01``."""
    stem = path.stem
    if len(stem) < 4 or stem[3] not in SHEMO_EMOTION_CODES:
        raise ValueError(f"{path.name}: not a ShEMO file name")
    return SHEMO_EMOTION_CODES[stem[3]], stem[:3]


def parent_dir_rule(path: Path) -> tuple[str, str]:
    """Label from the parent directory; speaker from the stem up to the first ``_``."""
    label = path.parent.name.lower()
    if label not in SHEMO_TAGS:
        raise ValueError(f"{path}: parent directory {path.parent.name!r} is not an emotion tag")
    return label, path.stem.split("_")[0]


LABEL_RULES = {"shemo": shemo_rule, "parent_dir": parent_dir_rule}


def scan_corpus(root_dir: str | os.PathLike, label_rule: str = "shemo", workers: int = 1) -> CorpusManifest:
    """Build a manifest from every audio file under ``root_dir``.

    Files that fail to decode or do not match the naming rule are listed in
    ``manifest.warnings`` rather than dropped silently.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise NoAudioFoundError(f"no audio found: {root} is not a directory")
    try:
        rule = LABEL_RULES[label_rule]
    except KeyError:
        raise ValueError(f"unknown label rule {label_rule!r}; expected one of {sorted(LABEL_RULES)}") from None
    paths = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in AUDIO_SUFFIXES)
    if not paths:
        raise NoAudioFoundError(f"no audio found under {root}")

    def probe(path: Path) -> ManifestEntry | str:
        try:
            label, speaker = rule(path)
            x, sr = decode_wav(path)
        except (ValueError, AudioDecodeError) as exc:
            return str(exc)
        return ManifestEntry(path.relative_to(root).as_posix(), label, speaker, x.shape[0] / sr)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(probe, paths))
    entries = [r for r in results if isinstance(r, ManifestEntry)]
    problems = [r for r in results if isinstance(r, str)]
    for msg in problems:
        logger.warning("skipping %s", msg)
    if not entries:
        raise NoAudioFoundError(f"no audio found under {root} ({len(problems)} unreadable files)")
    return CorpusManifest(entries, warnings=problems, base_dir=str(root))


def filter_fear(manifest: CorpusManifest) -> CorpusManifest:
    kept = [e for e in manifest.entries if e.label != FEAR]
    notes = list(manifest.warnings)
    if manifest.entries and not kept:
        msg = "manifest contained only fear entries; nothing left after filtering"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    return replace(manifest, entries=kept, warnings=notes)


def write_manifest(manifest: CorpusManifest, path: str | os.PathLike) -> None:
    lines = [MANIFEST_HEADER]
    for e in manifest.entries:
        for value in (e.path, e.label, e.speaker_id):
            if "\t" in value or "\n" in value:
                raise ManifestError(f"field contains a tab or newline: {value!r}")
        lines.append(f"{e.path}\t{e.label}\t{e.speaker_id}\t{e.duration_seconds!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path: str | os.PathLike, base_dir: str | os.PathLike | None = None) -> CorpusManifest:
    """Parse a v1 manifest. Relative paths resolve against ``base_dir``
    (default: the manifest's own directory)."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != MANIFEST_HEADER:
            raise ManifestError(f"{path}: expected header {MANIFEST_HEADER!r}, got {header!r}")
        entries = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ManifestError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
            try:
                duration = float(parts[3])
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: bad duration {parts[3]!r}") from None
            entries.append(ManifestEntry(parts[0], parts[1], parts[2], duration))
    manifest = CorpusManifest(entries, base_dir=str(base_dir if base_dir is not None else path.parent))
    manifest.validate()
    return manifest
