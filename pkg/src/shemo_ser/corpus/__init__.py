from shemo_ser.corpus.audio import (
    TARGET_SAMPLES,
    TARGET_SR,
    AudioClip,
    AudioDecodeError,
    load_and_normalize,
    load_normalized,
    normalize_clip,
    normalize_samples,
    save_normalized,
)
from shemo_ser.corpus.labels import FEAR, N_CLASSES, EmotionLabel
from shemo_ser.corpus.manifest import (
    CorpusManifest,
    ManifestEntry,
    ManifestError,
    NoAudioFoundError,
    filter_fear,
    read_manifest,
    scan_corpus,
    write_manifest,
)
from shemo_ser.corpus.split import DataSplit, SplitError, make_split
from shemo_ser.corpus.synth import CLASS_FUNDAMENTALS_HZ, synth_corpus

__all__ = [
    "TARGET_SAMPLES",
    "TARGET_SR",
    "AudioClip",
    "AudioDecodeError",
    "CLASS_FUNDAMENTALS_HZ",
    "CorpusManifest",
    "DataSplit",
    "EmotionLabel",
    "FEAR",
    "ManifestEntry",
    "ManifestError",
    "N_CLASSES",
    "NoAudioFoundError",
    "SplitError",
    "filter_fear",
    "load_and_normalize",
    "load_normalized",
    "make_split",
    "normalize_clip",
    "normalize_samples",
    "read_manifest",
    "save_normalized",
    "scan_corpus",
    "synth_corpus",
    "write_manifest",
]
