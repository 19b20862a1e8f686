from shemo_ser.features.cache import (
    CACHE_ENV,
    CacheCorrupt,
    CacheError,
    CacheMiss,
    FeatureCache,
    cache_get,
    cache_key,
    cache_put,
)
from shemo_ser.features.extractors import (
    REFERENCE_CHANNELS,
    REFERENCE_FRAMES,
    ExtractorError,
    FeatureExtractor,
    SyntheticExtractor,
    Wav2Vec2Extractor,
    make_extractor,
)
from shemo_ser.features.transforms import SQUARE_SIZE, mean_pool, resize_array, resize_to_square
from shemo_ser.features.types import FeatureMap, PooledVector, ResizedMap

__all__ = [
    "CACHE_ENV",
    "CacheCorrupt",
    "CacheError",
    "CacheMiss",
    "ExtractorError",
    "FeatureCache",
    "FeatureExtractor",
    "FeatureMap",
    "PooledVector",
    "REFERENCE_CHANNELS",
    "REFERENCE_FRAMES",
    "ResizedMap",
    "SQUARE_SIZE",
    "SyntheticExtractor",
    "Wav2Vec2Extractor",
    "cache_get",
    "cache_key",
    "cache_put",
    "make_extractor",
    "mean_pool",
    "resize_array",
    "resize_to_square",
]
