from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FeatureMap:
    """Encoder output for one clip: ``values`` is (frames, channels) float32."""

    values: np.ndarray
    layer_index: int
    extractor_id: str
    clip_ref: str

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass
class PooledVector:
    values: np.ndarray
    layer_index: int
    extractor_id: str
    clip_ref: str
    pooling: str = "mean-over-frames"


@dataclass
class ResizedMap:
    values: np.ndarray
    layer_index: int
    extractor_id: str
    clip_ref: str
    interpolation: str = "bilinear"
