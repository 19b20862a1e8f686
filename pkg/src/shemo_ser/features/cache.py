"""Content-addressed on-disk store for feature arrays.

Each entry is ``<key>.serf`` plus a ``<key>.json`` provenance sidecar. The
binary layout is a little-endian header::

    magic  b"SERF"
    u16    format version
    u32    rows
    u32    cols
    u8     dtype code (0 = float32 little-endian)
    u32    CRC-32 of the payload

followed by the row-major payload. Writes go through a temp file and an
atomic rename, so concurrent writers of one key never expose a torn file.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from shemo_ser._io import atomic_write
from shemo_ser.features.types import FeatureMap, PooledVector, ResizedMap

MAGIC = b"SERF"
VERSION = 1
DTYPE_F32LE = 0
_HEADER = struct.Struct("<4sHIIBI")

CACHE_ENV = "SER_CACHE_DIR"


class CacheError(Exception):
    pass


class CacheMiss(CacheError, KeyError):
    pass


class CacheCorrupt(CacheError):
    pass


def transform_tag(obj: FeatureMap | PooledVector | ResizedMap, size: int | None = None) -> str:
    if isinstance(obj, FeatureMap):
        return "map"
    if isinstance(obj, PooledVector):
        return obj.pooling
    if isinstance(obj, ResizedMap):
        n = size or obj.values.shape[0]
        return f"resize-{n}x{n}-{obj.interpolation}"
    raise TypeError(f"cannot cache {type(obj).__name__}")


def cache_key(clip_ref: str, extractor_id: str, layer_index: int, transform: str) -> str:
    ident = json.dumps([clip_ref, extractor_id, int(layer_index), transform], separators=(",", ":"))
    return hashlib.sha256(ident.encode("utf-8")).hexdigest()[:40]


def encode(values: np.ndarray) -> bytes:
    a = np.ascontiguousarray(values, dtype="<f4")
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"expected a 1D or 2D array, got shape {a.shape}")
    payload = a.tobytes()
    return _HEADER.pack(MAGIC, VERSION, a.shape[0], a.shape[1], DTYPE_F32LE, zlib.crc32(payload)) + payload


def decode(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise CacheCorrupt(f"truncated header ({len(blob)} bytes)")
    magic, version, rows, cols, dtype, crc = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CacheCorrupt(f"bad magic {magic!r}")
    if version != VERSION:
        raise CacheCorrupt(f"unsupported cache version {version} (expected {VERSION})")
    if dtype != DTYPE_F32LE:
        raise CacheCorrupt(f"unsupported dtype code {dtype}")
    payload = blob[_HEADER.size :]
    if len(payload) != rows * cols * 4:
        raise CacheCorrupt(f"truncated payload: {len(payload)} bytes for {rows}x{cols} float32")
    if zlib.crc32(payload) != crc:
        raise CacheCorrupt("payload checksum mismatch")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float32)


class FeatureCache:
    def __init__(self, cache_dir: str | os.PathLike):
        self.root = Path(cache_dir)

    def _paths(self, key: str) -> tuple[Path, Path]:
        return self.root / f"{key}.serf", self.root / f"{key}.json"

    def key_for(self, obj) -> str:
        return cache_key(obj.clip_ref, obj.extractor_id, obj.layer_index, transform_tag(obj))

    def has(self, key: str) -> bool:
        return self._paths(key)[0].exists()

    def put(self, obj: FeatureMap | PooledVector | ResizedMap) -> str:
        tag = transform_tag(obj)
        key = cache_key(obj.clip_ref, obj.extractor_id, obj.layer_index, tag)
        self.root.mkdir(parents=True, exist_ok=True)
        meta = {
            "kind": type(obj).__name__,
            "clip_ref": obj.clip_ref,
            "extractor_id": obj.extractor_id,
            "layer_index": int(obj.layer_index),
            "transform": tag,
            "shape": list(np.shape(obj.values)),
            "version": VERSION,
        }
        if isinstance(obj, PooledVector):
            meta["pooling"] = obj.pooling
        if isinstance(obj, ResizedMap):
            meta["interpolation"] = obj.interpolation
        blob_path, meta_path = self._paths(key)
        # Sidecar first: a visible .serf always has its provenance next to it.
        atomic_write(meta_path, json.dumps(meta, indent=2, sort_keys=True).encode())
        atomic_write(blob_path, encode(obj.values))
        return key

    def get_array(self, key: str) -> np.ndarray:
        blob_path, _ = self._paths(key)
        try:
            blob = blob_path.read_bytes()
        except FileNotFoundError:
            raise CacheMiss(key) from None
        return decode(blob)

    def get(self, key: str) -> FeatureMap | PooledVector | ResizedMap:
        values = self.get_array(key)
        try:
            meta = json.loads(self._paths(key)[1].read_text())
        except (FileNotFoundError, json.JSONDecodeError) as exc:
            raise CacheCorrupt(f"{key}: unreadable sidecar ({exc})") from exc
        if meta.get("version") != VERSION:
            raise CacheCorrupt(f"{key}: sidecar version {meta.get('version')} (expected {VERSION})")
        common = (meta["layer_index"], meta["extractor_id"], meta["clip_ref"])
        kind = meta["kind"]
        if kind == "FeatureMap":
            return FeatureMap(values, *common)
        if kind == "PooledVector":
            return PooledVector(values[0], *common, pooling=meta["pooling"])
        if kind == "ResizedMap":
            return ResizedMap(values, *common, interpolation=meta["interpolation"])
        raise CacheCorrupt(f"{key}: unknown kind {kind!r}")


def cache_put(obj, cache_dir: str | os.PathLike) -> str:
    return FeatureCache(cache_dir).put(obj)


def cache_get(key: str, cache_dir: str | os.PathLike):
    return FeatureCache(cache_dir).get(key)
