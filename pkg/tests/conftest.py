import numpy as np
import pytest

from shemo_ser.corpus import CorpusManifest, ManifestEntry


def dominant_frequency(x: np.ndarray, sample_rate: int) -> float:
    spectrum = np.abs(np.fft.rfft(x * np.hanning(x.shape[0])))
    return float(np.fft.rfftfreq(x.shape[0], 1.0 / sample_rate)[np.argmax(spectrum)])


def shemo_like_manifest() -> CorpusManifest:
    """A manifest with the ShEMO per-class counts (fear included)."""
    counts = {"surprise": 225, "happiness": 201, "sadness": 449, "anger": 1059, "neutral": 1028, "fear": 38}
    entries = []
    for label, n in counts.items():
        for k in range(n):
            entries.append(ManifestEntry(f"{label}/{k:04d}.wav", label, f"S{k % 87:02d}", 3.0))
    return CorpusManifest(entries)


@pytest.fixture
def shemo_manifest():
    return shemo_like_manifest()


@pytest.fixture(scope="session")
def hermetic_run(tmp_path_factory):
    """One full hermetic pipeline run (synthetic corpus and extractor, width/8 CNN, 60 epochs).

    Shared by the acceptance and CLI tests because it takes a few minutes.
    """
    from shemo_ser import pipeline
    from shemo_ser.config import hermetic_config
    from shemo_ser.features.cache import CACHE_ENV

    import time

    out = tmp_path_factory.mktemp("hermetic")
    start = time.perf_counter()
    with pytest.MonkeyPatch.context() as mp:
        mp.delenv(CACHE_ENV, raising=False)
        cfg = hermetic_config(out / "run", seed=0, max_epochs=60)
        pipeline.prepare(cfg)
        pipeline.extract(cfg)
        model, history = pipeline.train_stage(cfg)
        report = pipeline.evaluate_stage(cfg, "val")
    seconds = time.perf_counter() - start
    return {"cfg": cfg, "model": model, "history": history, "report": report, "seconds": seconds}
