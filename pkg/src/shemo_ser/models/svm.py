"""RBF support vector machine over mean-pooled feature vectors."""

from __future__ import annotations

import numpy as np
from sklearn.svm import SVC


class SvmClassifier:
    """Per-feature standardization followed by an RBF-kernel SVC.

    Standardization statistics come from the training vectors only; a
    feature with zero variance keeps scale 1. ``gamma="auto"`` resolves to
    ``1 / input_dim``.
    """

    def __init__(self, C: float = 1.0, gamma: float | str = "auto", input_dim: int = 1024, n_classes: int = 5, seed: int = 0):
        if C <= 0:
            raise ValueError(f"C must be positive, got {C}")
        self.C = float(C)
        self.input_dim = int(input_dim)
        self.n_classes = n_classes
        self.seed = seed
        if gamma == "auto":
            self.gamma = 1.0 / self.input_dim
        elif isinstance(gamma, (int, float)) and gamma > 0:
            self.gamma = float(gamma)
        else:
            raise ValueError(f"gamma must be 'auto' or a positive number, got {gamma!r}")
        self.mean_: np.ndarray | None = None
        self.scale_: np.ndarray | None = None
        self.svc_: SVC | None = None

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean_) / self.scale_

    def fit(self, x: np.ndarray, y: np.ndarray) -> "SvmClassifier":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"expected vectors of shape (N, {self.input_dim}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("training vectors contain NaN or infinite values")
        if np.unique(y).size < 2:
            raise ValueError("SVM training needs at least two classes")
        self.mean_ = x.mean(axis=0)
        std = x.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        self.svc_ = SVC(kernel="rbf", C=self.C, gamma=self.gamma, probability=True, random_state=self.seed)
        self.svc_.fit(self.standardize(x), y)
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        if self.svc_ is None:
            raise RuntimeError("SVM is not fitted")
        z = self.standardize(np.atleast_2d(x))
        proba = np.zeros((z.shape[0], self.n_classes))
        proba[:, self.svc_.classes_] = self.svc_.predict_proba(z)
        return proba / proba.sum(axis=1, keepdims=True)

    def state(self) -> dict:
        return {
            "C": self.C,
            "gamma": self.gamma,
            "input_dim": self.input_dim,
            "n_classes": self.n_classes,
            "seed": self.seed,
            "mean": self.mean_,
            "scale": self.scale_,
            "svc": self.svc_,
        }

    @classmethod
    def from_state(cls, state: dict) -> "SvmClassifier":
        m = cls(state["C"], state["gamma"], state["input_dim"], state["n_classes"], state["seed"])
        m.mean_, m.scale_, m.svc_ = state["mean"], state["scale"], state["svc"]
        return m
