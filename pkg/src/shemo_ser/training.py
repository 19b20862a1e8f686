"""Optimization loop, loss, learning-rate schedule and training history."""

from __future__ import annotations

import copy
import json
import logging
import math
import os
import warnings
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import torch
import torch.nn.functional as F

from shemo_ser._io import atomic_write_text
from shemo_ser.corpus.labels import TARGET_TAGS
from shemo_ser.models import checkpoint
from shemo_ser.models.base import ModelSpec, TrainedModel, is_torch_model, to_image_batch
from shemo_ser.models.svm import SvmClassifier

logger = logging.getLogger(__name__)

PROB_EPS = 1e-12


class TrainingError(Exception):
    pass


@dataclass
class SchedulerSpec:
    kind: str = "plateau"
    factor: float = 0.5
    patience: int = 10
    min_lr: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("plateau", "constant"):
            raise ValueError(f"unknown scheduler {self.kind!r}; expected 'plateau' or 'constant'")
        if not 0 < self.factor < 1:
            raise ValueError(f"scheduler factor must be in (0, 1), got {self.factor}")
        if self.patience < 1:
            raise ValueError(f"scheduler patience must be >= 1, got {self.patience}")


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 4
    max_epochs: int = 150
    early_stopping_patience: int = 30
    seed: int = 0
    loss: str = "categorical-cross-entropy"
    selection_metric: str = "val_acc"
    class_weights: bool = False
    deterministic: bool = True
    scheduler: SchedulerSpec = field(default_factory=SchedulerSpec)

    def __post_init__(self):
        if isinstance(self.scheduler, dict):
            self.scheduler = SchedulerSpec(**self.scheduler)
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.loss != "categorical-cross-entropy":
            raise ValueError(f"only categorical-cross-entropy is supported, got {self.loss!r}")
        if self.selection_metric not in ("val_acc", "val_loss"):
            raise ValueError(f"selection_metric must be 'val_acc' or 'val_loss', got {self.selection_metric!r}")

    @classmethod
    def for_family(cls, family: str, **overrides) -> "TrainConfig":
        """Adam at 1e-3 for the CNN; SGD at 1e-2 with momentum for transfer."""
        base: dict[str, Any] = {"optimizer": "sgd", "lr": 1e-2} if family == "transfer" else {}
        return cls(**{**base, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, rec: EpochRecord) -> None:
        if self.records and rec.epoch <= self.records[-1].epoch:
            raise ValueError(f"epoch {rec.epoch} does not follow epoch {self.records[-1].epoch}")
        values = [rec.train_loss, rec.train_acc, rec.val_loss, rec.val_acc, rec.lr]
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite value in epoch record {rec}")
        self.records.append(rec)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self.records)

    def write(self, path: str | os.PathLike) -> None:
        atomic_write_text(path, self.to_jsonl())

    @classmethod
    def read(cls, path: str | os.PathLike) -> "TrainingHistory":
        h = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    h.append(EpochRecord(**json.loads(line)))
        return h


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean over the batch of ``-log p[target]`` for one-hot ``targets``.

    Probabilities at the target below 1e-12 are clamped; each clamp is
    reported through a ``RuntimeWarning``.
    """
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape or probs.ndim != 2:
        raise ValueError(f"probs {probs.shape} and targets {targets.shape} must be matching 2D arrays")
    p_target = (probs * targets).sum(axis=1)
    clamped = int(np.count_nonzero(p_target < PROB_EPS))
    if clamped:
        warnings.warn(f"{clamped} target probabilities clamped to {PROB_EPS}", RuntimeWarning, stacklevel=2)
    return float(np.mean(-np.log(np.maximum(p_target, PROB_EPS))))


def cross_entropy_grad(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Gradient of ``cross_entropy(softmax(logits), targets)`` w.r.t. the logits."""
    return (softmax(np.asarray(logits, dtype=np.float64)) - targets) / logits.shape[0]


def schedule_lr(history: TrainingHistory, spec: SchedulerSpec) -> float:
    """Learning rate for the next epoch under reduce-on-plateau.

    The plateau counter counts epochs since the best validation loss was
    set, including that epoch, and restarts whenever the rate changed.
    When it reaches ``patience`` the rate is multiplied by ``factor``,
    never going below ``min_lr``.
    """
    if not history.records:
        raise ValueError("schedule_lr needs at least one recorded epoch")
    lr = history.records[-1].lr
    if spec.kind == "constant":
        return lr
    best = math.inf
    run = 0
    prev_lr = None
    for rec in history.records:
        if prev_lr is not None and rec.lr != prev_lr:
            run = 0
        prev_lr = rec.lr
        if rec.val_loss < best:
            best = rec.val_loss
            run = 1
        else:
            run += 1
    if run >= spec.patience:
        return max(lr * spec.factor, spec.min_lr)
    return lr


@dataclass
class ArrayDataset:
    """Stacked classifier inputs and their output-column targets."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if len(self.inputs) != len(self.targets):
            raise ValueError(f"{len(self.inputs)} inputs but {len(self.targets)} targets")

    def __len__(self) -> int:
        return len(self.targets)


@contextmanager
def deterministic_mode(enabled: bool):
    previous = torch.are_deterministic_algorithms_enabled()
    torch.use_deterministic_algorithms(enabled)
    try:
        yield
    finally:
        torch.use_deterministic_algorithms(previous)


def _make_optimizer(net, cfg: TrainConfig):
    params = [p for p in net.parameters() if p.requires_grad]
    if cfg.optimizer == "sgd":
        return torch.optim.SGD(params, lr=cfg.lr, momentum=cfg.momentum)
    return torch.optim.Adam(params, lr=cfg.lr)


def _class_weights(targets: np.ndarray, n_classes: int) -> torch.Tensor:
    counts = np.bincount(targets, minlength=n_classes).astype(np.float64)
    w = np.where(counts > 0, counts.sum() / np.maximum(counts, 1) / n_classes, 0.0)
    return torch.tensor(w, dtype=torch.float32)


def _evaluate_loss_acc(net, data: ArrayDataset, batch_size: int, weight=None) -> tuple[float, float]:
    net.eval()
    total_loss = 0.0
    correct = 0
    with torch.no_grad():
        for start in range(0, len(data), batch_size):
            x = to_image_batch(data.inputs[start : start + batch_size])
            y = torch.from_numpy(data.targets[start : start + batch_size])
            logits = net(x)
            total_loss += float(F.cross_entropy(logits, y, weight=weight, reduction="sum"))
            correct += int((logits.argmax(dim=1) == y).sum())
    return total_loss / len(data), correct / len(data)


def train(
    model,
    train_set: ArrayDataset,
    val_set: ArrayDataset,
    config: TrainConfig,
    spec: ModelSpec,
    label_names=TARGET_TAGS,
    checkpoint_dir: str | os.PathLike | None = None,
    metadata: dict | None = None,
) -> tuple[TrainedModel, TrainingHistory]:
    """Fit ``model`` (as returned by :func:`shemo_ser.models.build`).

    Torch models are trained with mini-batches of categorical
    cross-entropy; the checkpoint with the best validation score is
    returned. The SVM is fitted in one shot and yields an empty history.
    With ``checkpoint_dir`` set, ``best.ckpt``, ``last.ckpt`` and
    ``history.jsonl`` are written there as training proceeds.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise TrainingError("training and validation sets must be non-empty")
    metadata = dict(metadata or {})
    history = TrainingHistory()
    out = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    if isinstance(model, SvmClassifier):
        if config.max_epochs > 0:
            model.fit(train_set.inputs, train_set.targets)
        trained = TrainedModel(spec, model, tuple(label_names), metadata)
        if out is not None:
            if config.max_epochs > 0:
                checkpoint.save(trained, out / "best.ckpt")
                checkpoint.save(trained, out / "last.ckpt")
            history.write(out / "history.jsonl")
        return trained, history
    if not is_torch_model(model):
        raise TrainingError(f"cannot train {type(model).__name__}")

    n_classes = spec.n_classes
    weight = _class_weights(train_set.targets, n_classes) if config.class_weights else None
    optimizer = _make_optimizer(model, config)
    generator = torch.Generator().manual_seed(config.seed)
    best_state = copy.deepcopy(model.state_dict())
    best_score: tuple = (-math.inf,)
    since_best = 0
    lr = config.lr

    with deterministic_mode(config.deterministic), torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        for epoch in range(1, config.max_epochs + 1):
            for group in optimizer.param_groups:
                group["lr"] = lr
            model.train()
            order = torch.randperm(len(train_set), generator=generator).numpy()
            total_loss = 0.0
            correct = 0
            for b, start in enumerate(range(0, len(order), config.batch_size)):
                idx = order[start : start + config.batch_size]
                x = to_image_batch(train_set.inputs[idx])
                y = torch.from_numpy(train_set.targets[idx])
                optimizer.zero_grad(set_to_none=True)
                logits = model(x)
                loss = F.cross_entropy(logits, y, weight=weight)
                if not torch.isfinite(loss):
                    raise TrainingError(
                        f"non-finite loss (NaN/Inf) at epoch {epoch}, batch {b}; dataset rows {idx.tolist()}"
                    )
                loss.backward()
                optimizer.step()
                total_loss += loss.item() * len(idx)
                correct += int((logits.argmax(dim=1) == y).sum())
            val_loss, val_acc = _evaluate_loss_acc(model, val_set, config.batch_size, weight)
            if not math.isfinite(val_loss):
                raise TrainingError(f"non-finite validation loss (NaN/Inf) at epoch {epoch}")
            rec = EpochRecord(epoch, total_loss / len(train_set), correct / len(train_set), val_loss, val_acc, lr)
            history.append(rec)
            logger.info(
                "epoch %d: train_loss=%.4f train_acc=%.3f val_loss=%.4f val_acc=%.3f lr=%.2e",
                epoch, rec.train_loss, rec.train_acc, rec.val_loss, rec.val_acc, lr,
            )
            # Ties on val_acc go to the lower val_loss.
            score = (val_acc, -val_loss) if config.selection_metric == "val_acc" else (-val_loss,)
            if score > best_score:
                best_score = score
                best_state = copy.deepcopy(model.state_dict())
                since_best = 0
                if out is not None:
                    checkpoint.save(TrainedModel(spec, model, tuple(label_names), metadata), out / "best.ckpt")
            else:
                since_best += 1
            if out is not None:
                checkpoint.save(TrainedModel(spec, model, tuple(label_names), metadata), out / "last.ckpt")
                history.write(out / "history.jsonl")
            if since_best >= config.early_stopping_patience:
                logger.info("early stop at epoch %d (%d epochs without improvement)", epoch, since_best)
                break
            lr = schedule_lr(history, config.scheduler)

    model.load_state_dict(best_state)
    model.eval()
    trained = TrainedModel(spec, model, tuple(label_names), metadata)
    if out is not None:
        if not history.records:
            checkpoint.save(trained, out / "best.ckpt")
            checkpoint.save(trained, out / "last.ckpt")
        history.write(out / "history.jsonl")
    return trained, history
