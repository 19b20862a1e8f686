"""Train/validation/test partitioning."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from shemo_ser.corpus.manifest import CorpusManifest

PART_NAMES = ("train", "val", "test")


class SplitError(ValueError):
    pass


@dataclass
class DataSplit:
    train: list[int]
    val: list[int]
    test: list[int]
    seed: int
    strategy: str

    def parts(self) -> dict[str, list[int]]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DataSplit":
        return cls(list(d["train"]), list(d["val"]), list(d["test"]), int(d["seed"]), str(d["strategy"]))


def _check_ratios(ratios) -> tuple[float, float, float]:
    if len(ratios) != 3:
        raise SplitError(f"expected (train, val, test) ratios, got {ratios!r}")
    r = tuple(float(x) for x in ratios)
    if any(x < 0 for x in r) or not np.isclose(sum(r), 1.0):
        raise SplitError(f"ratios must be nonnegative and sum to 1, got {r}")
    if r[0] == 0 or r[1] == 0:
        raise SplitError(f"train and validation ratios must be nonzero, got {r}")
    return r


def _allocate(n: int, ratios: tuple[float, float, float]) -> list[int]:
    """Largest-remainder allocation of ``n`` items, at least one per nonzero part."""
    exact = [n * r for r in ratios]
    counts = [int(np.floor(x)) for x in exact]
    order = sorted(range(3), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    for i in range(3):
        if ratios[i] > 0 and counts[i] == 0:
            donor = max(range(3), key=lambda j: counts[j])
            counts[donor] -= 1
            counts[i] += 1
    return counts


def make_split(
    manifest: CorpusManifest,
    ratios=(0.8, 0.1, 0.1),
    seed: int = 42,
    speaker_independent: bool = False,
) -> DataSplit:
    """Deterministic split of manifest indices.

    The default is stratified by label: every class is shuffled with a
    seeded generator and cut according to ``ratios``. With
    ``speaker_independent`` whole speakers are assigned to one part, which
    keeps speakers disjoint at the cost of exact stratification.
    """
    r = _check_ratios(ratios)
    n_parts = sum(1 for x in r if x > 0)
    rng = np.random.default_rng(seed)
    if speaker_independent:
        return _speaker_split(manifest, r, n_parts, rng, seed)

    by_label: dict[str, list[int]] = {}
    for i, e in enumerate(manifest.entries):
        by_label.setdefault(e.label, []).append(i)
    parts: list[list[int]] = [[], [], []]
    for label in sorted(by_label):
        idx = by_label[label]
        if len(idx) < n_parts:
            raise SplitError(f"class {label!r} has {len(idx)} entries, fewer than the {n_parts} split parts")
        perm = [idx[k] for k in rng.permutation(len(idx))]
        counts = _allocate(len(idx), r)
        start = 0
        for p, c in enumerate(counts):
            parts[p].extend(perm[start : start + c])
            start += c
    return DataSplit(sorted(parts[0]), sorted(parts[1]), sorted(parts[2]), seed, "stratified")


def _speaker_split(manifest, r, n_parts, rng, seed) -> DataSplit:
    by_speaker: dict[str, list[int]] = {}
    for i, e in enumerate(manifest.entries):
        by_speaker.setdefault(e.speaker_id, []).append(i)
    speakers = sorted(by_speaker)
    if len(speakers) < n_parts:
        raise SplitError(f"{len(speakers)} speakers cannot fill {n_parts} speaker-disjoint parts")
    speakers = [speakers[k] for k in rng.permutation(len(speakers))]
    targets = _allocate(len(manifest.entries), r)
    active = [p for p in range(3) if r[p] > 0]
    parts: list[list[int]] = [[], [], []]
    ci = 0
    for k, spk in enumerate(speakers):
        p = active[ci]
        parts[p].extend(by_speaker[spk])
        remaining = len(speakers) - k - 1
        later = len(active) - 1 - ci
        if later and (len(parts[p]) >= targets[p] or remaining == later):
            ci += 1
    return DataSplit(sorted(parts[0]), sorted(parts[1]), sorted(parts[2]), seed, "speaker-independent")
