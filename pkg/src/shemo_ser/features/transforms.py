"""Classifier inputs derived from a feature map."""

from __future__ import annotations

import numpy as np

from shemo_ser.features.types import FeatureMap, PooledVector, ResizedMap

SQUARE_SIZE = 300
INTERPOLATIONS = ("bilinear", "nearest")


def mean_pool(fmap: FeatureMap) -> PooledVector:
    """Average over frames: one value per channel."""
    v = np.asarray(fmap.values)
    if v.ndim != 2 or v.shape[0] < 1:
        raise ValueError(f"mean_pool needs a non-empty 2D map, got shape {v.shape}")
    pooled = v.mean(axis=0, dtype=np.float64).astype(np.float32)
    return PooledVector(pooled, fmap.layer_index, fmap.extractor_id, fmap.clip_ref)


def _grid(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray]:
    # Corner-aligned sample positions: output 0 -> input 0, output n_out-1 -> input n_in-1.
    pos = np.linspace(0.0, n_in - 1, n_out)
    lo = np.minimum(np.floor(pos).astype(np.intp), n_in - 2)
    return lo, pos - lo


def resize_array(
    values: np.ndarray, size: int = SQUARE_SIZE, interpolation: str = "bilinear", dtype=np.float32
) -> np.ndarray:
    """Resize to ``size`` x ``size``, computing in float64 and returning ``dtype``."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise ValueError(f"resize needs at least a 2x2 map, got shape {a.shape}")
    if interpolation == "nearest":
        rows = np.rint(np.linspace(0.0, a.shape[0] - 1, size)).astype(np.intp)
        cols = np.rint(np.linspace(0.0, a.shape[1] - 1, size)).astype(np.intp)
        return a[np.ix_(rows, cols)].astype(dtype)
    if interpolation != "bilinear":
        raise ValueError(f"unknown interpolation {interpolation!r}; expected one of {INTERPOLATIONS}")
    r0, wr = _grid(a.shape[0], size)
    c0, wc = _grid(a.shape[1], size)
    left = a[:, c0]
    right = a[:, c0 + 1]
    across = left * (1.0 - wc) + right * wc
    top = across[r0]
    bottom = across[r0 + 1]
    out = top * (1.0 - wr)[:, None] + bottom * wr[:, None]
    return out.astype(dtype)


def resize_to_square(fmap: FeatureMap, size: int = SQUARE_SIZE, interpolation: str = "bilinear") -> ResizedMap:
    """Interpolate a (frames, channels) map onto a ``size`` x ``size`` grid.

    Bilinear with aligned corners, so the four output corners equal the
    input corners and every output lies within the input's range.
    """
    out = resize_array(fmap.values, size, interpolation)
    return ResizedMap(out, fmap.layer_index, fmap.extractor_id, fmap.clip_ref, interpolation)
