"""Model specifications, construction, and the fitted-model wrapper."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import torch

from shemo_ser.corpus.labels import N_CLASSES, TARGET_TAGS, EmotionLabel
from shemo_ser.models.cnn import DROPOUT_RATES, ProposedCnn
from shemo_ser.models.svm import SvmClassifier
from shemo_ser.models.transfer import SCALES, TransferNet, transfer_build

FAMILY_DEFAULTS: dict[str, dict[str, Any]] = {
    "svm": {"C": 1.0, "gamma": "auto", "input_dim": 1024},
    "proposed-cnn": {"input_size": 300, "width_divisor": 1, "dropout": list(DROPOUT_RATES), "fc_units": 64},
    "transfer": {"scale": "b3", "head": [64], "backbone": "reference", "artifact_path": None, "input_size": 300},
}
FAMILIES = tuple(FAMILY_DEFAULTS)


class ModelSpecError(ValueError):
    pass


@dataclass
class ModelSpec:
    family: str
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    n_classes: int = N_CLASSES

    def __post_init__(self):
        if self.family not in FAMILY_DEFAULTS:
            raise ModelSpecError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        if self.n_classes != N_CLASSES:
            raise ModelSpecError(f"n_classes is fixed at {N_CLASSES}, got {self.n_classes}")
        unknown = set(self.hyperparameters) - set(FAMILY_DEFAULTS[self.family])
        if unknown:
            raise ModelSpecError(f"unknown {self.family} hyperparameters: {sorted(unknown)}")
        self.hyperparameters = {**copy.deepcopy(FAMILY_DEFAULTS[self.family]), **self.hyperparameters}
        self._validate()

    def _validate(self) -> None:
        h = self.hyperparameters
        if self.family == "svm":
            if not (isinstance(h["C"], (int, float)) and h["C"] > 0):
                raise ModelSpecError(f"svm C must be positive, got {h['C']!r}")
            if h["gamma"] != "auto" and not (isinstance(h["gamma"], (int, float)) and h["gamma"] > 0):
                raise ModelSpecError(f"svm gamma must be 'auto' or positive, got {h['gamma']!r}")
            if not (isinstance(h["input_dim"], int) and h["input_dim"] >= 1):
                raise ModelSpecError(f"svm input_dim must be a positive int, got {h['input_dim']!r}")
        elif self.family == "proposed-cnn":
            if not (isinstance(h["width_divisor"], int) and h["width_divisor"] >= 1):
                raise ModelSpecError(f"width_divisor must be a positive int, got {h['width_divisor']!r}")
            if len(h["dropout"]) != 5 or not all(0.0 <= p < 1.0 for p in h["dropout"]):
                raise ModelSpecError(f"dropout must be 5 rates in [0, 1), got {h['dropout']!r}")
            if not (isinstance(h["input_size"], int) and h["input_size"] >= 2):
                raise ModelSpecError(f"input_size must be an int >= 2, got {h['input_size']!r}")
        else:
            if h["scale"] not in SCALES:
                raise ModelSpecError(f"transfer scale must be one of {SCALES}, got {h['scale']!r}")
            if h["backbone"] not in ("reference", "stub"):
                raise ModelSpecError(f"transfer backbone must be 'reference' or 'stub', got {h['backbone']!r}")
            if not h["head"] or not all(isinstance(u, int) and u > 0 for u in h["head"]):
                raise ModelSpecError(f"transfer head must list positive layer widths, got {h['head']!r}")

    @property
    def input_kind(self) -> str:
        """``"pooled"`` (1D vectors) for the SVM, ``"resized"`` (square maps) otherwise."""
        return "pooled" if self.family == "svm" else "resized"

    @property
    def input_size(self) -> int | None:
        return None if self.family == "svm" else self.hyperparameters["input_size"]

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "hyperparameters": self.hyperparameters, "n_classes": self.n_classes}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelSpec":
        return cls(d["family"], dict(d.get("hyperparameters", {})), d.get("n_classes", N_CLASSES))

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build(spec: ModelSpec, seed: int = 0, load_weights: bool = True, check_shapes: bool = True):
    """Construct an untrained model; initialization depends only on ``seed``."""
    h = spec.hyperparameters
    if spec.family == "svm":
        return SvmClassifier(C=h["C"], gamma=h["gamma"], input_dim=h["input_dim"], n_classes=spec.n_classes, seed=seed)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        if spec.family == "proposed-cnn":
            net = ProposedCnn(h["input_size"], h["width_divisor"], h["dropout"], spec.n_classes, h["fc_units"])
            if check_shapes:
                net.check_ladder()
        else:
            net = transfer_build(h["scale"], h["head"], h["backbone"], h["artifact_path"], spec.n_classes, load_weights)
    return net


def encode_labels(labels, label_names=TARGET_TAGS) -> np.ndarray:
    """Map tags, :class:`EmotionLabel` members or integer codes to output columns."""
    index = {name: i for i, name in enumerate(label_names)}
    out = []
    for lab in labels:
        if isinstance(lab, EmotionLabel):
            tag = lab.tag
        elif isinstance(lab, (int, np.integer)):
            tag = EmotionLabel(int(lab)).tag
        else:
            tag = str(lab)
        if tag not in index:
            raise ValueError(f"label {tag!r} is not in the model's label map {tuple(label_names)}")
        out.append(index[tag])
    return np.asarray(out, dtype=np.int64)


def as_array(inputs) -> np.ndarray:
    """Stack feature objects (or pass arrays through) into one float32 array."""
    if isinstance(inputs, np.ndarray):
        return inputs.astype(np.float32, copy=False)
    return np.stack([np.asarray(getattr(x, "values", x), dtype=np.float32) for x in inputs])


def to_image_batch(x: np.ndarray) -> torch.Tensor:
    t = torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32))
    return t.unsqueeze(1) if t.ndim == 3 else t


@dataclass
class TrainedModel:
    spec: ModelSpec
    net: Any
    label_names: tuple[str, ...] = TARGET_TAGS
    # Provenance needed to rebuild inputs at prediction time (extractor, transform, ...).
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.label_names = tuple(self.label_names)
        if sorted(self.label_names) != sorted(TARGET_TAGS):
            raise ValueError(f"label map must be a permutation of {TARGET_TAGS}, got {self.label_names}")

    @property
    def standardization(self) -> tuple[np.ndarray, np.ndarray] | None:
        if isinstance(self.net, SvmClassifier) and self.net.mean_ is not None:
            return self.net.mean_, self.net.scale_
        return None

    def predict_proba(self, inputs, batch_size: int = 8) -> np.ndarray:
        """Probabilities with columns ordered as ``label_names``."""
        x = as_array(inputs)
        if isinstance(self.net, SvmClassifier):
            return self.net.predict_proba(x)
        self.net.eval()
        chunks = []
        with torch.no_grad():
            for start in range(0, x.shape[0], batch_size):
                logits = self.net(to_image_batch(x[start : start + batch_size])).double()
                chunks.append(torch.softmax(logits, dim=1).numpy())
        return np.concatenate(chunks) if chunks else np.zeros((0, self.spec.n_classes))

    def predict(self, inputs) -> list[str]:
        return [self.label_names[i] for i in self.predict_proba(inputs).argmax(axis=1)]

    def codes_for_columns(self) -> np.ndarray:
        """EmotionLabel code of each output column."""
        return np.array([int(EmotionLabel.from_tag(t)) for t in self.label_names])


def svm_fit(vectors, labels, spec: ModelSpec, seed: int = 0, label_names=TARGET_TAGS) -> TrainedModel:
    if spec.family != "svm":
        raise ModelSpecError(f"svm_fit needs an svm spec, got {spec.family!r}")
    model = build(spec, seed)
    model.fit(as_array(vectors), encode_labels(labels, label_names))
    return TrainedModel(spec, model, tuple(label_names))


def is_torch_model(net) -> bool:
    return isinstance(net, (ProposedCnn, TransferNet))
