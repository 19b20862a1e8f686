"""Versioned model checkpoints.

A checkpoint is a zip container with two members: ``manifest.json``
(family, spec and its hash, label map, standardization statistics,
provenance metadata, payload digest) and ``params.bin`` (the parameter
blob). The SHA-256 of ``params.bin`` is stored in the manifest and
verified on load.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import pickle
import zipfile
import zlib

import torch

from shemo_ser._io import atomic_write
from shemo_ser.models.base import ModelSpec, TrainedModel, build, is_torch_model
from shemo_ser.models.svm import SvmClassifier

FORMAT = "ser-checkpoint"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def _params_blob(net) -> bytes:
    buf = io.BytesIO()
    if isinstance(net, SvmClassifier):
        pickle.dump(net.state(), buf, protocol=pickle.HIGHEST_PROTOCOL)
    elif is_torch_model(net):
        torch.save(net.state_dict(), buf)
    else:
        raise CheckpointError(f"cannot checkpoint {type(net).__name__}")
    return buf.getvalue()


def save(model: TrainedModel, path: str | os.PathLike) -> None:
    blob = _params_blob(model.net)
    manifest = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "family": model.spec.family,
        "spec": model.spec.to_dict(),
        "spec_hash": model.spec.spec_hash(),
        "label_names": list(model.label_names),
        "standardization": None,
        "metadata": model.metadata,
        "params_sha256": hashlib.sha256(blob).hexdigest(),
    }
    if model.standardization is not None:
        mean, scale = model.standardization
        manifest["standardization"] = {"mean": mean.tolist(), "scale": scale.tolist()}
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        # Fixed timestamps keep the container byte-stable for identical models.
        for name, data in (("manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode()), ("params.bin", blob)):
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, data)
    atomic_write(path, buf.getvalue())


def load(path: str | os.PathLike) -> TrainedModel:
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            blob = zf.read("params.bin")
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, zlib.error) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    if manifest.get("format") != FORMAT or manifest.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint {manifest.get('format')!r} v{manifest.get('version')} "
            f"(expected {FORMAT!r} v{FORMAT_VERSION})"
        )
    if hashlib.sha256(blob).hexdigest() != manifest["params_sha256"]:
        raise CheckpointError(f"{path}: parameter checksum mismatch")
    spec = ModelSpec.from_dict(manifest["spec"])
    if spec.spec_hash() != manifest["spec_hash"]:
        raise CheckpointError(f"{path}: spec hash mismatch")
    if spec.family == "svm":
        net = SvmClassifier.from_state(pickle.loads(blob))
    else:
        net = build(spec, seed=0, load_weights=False, check_shapes=False)
        net.load_state_dict(torch.load(io.BytesIO(blob), map_location="cpu", weights_only=True))
        net.eval()
    return TrainedModel(spec, net, tuple(manifest["label_names"]), manifest.get("metadata", {}))

