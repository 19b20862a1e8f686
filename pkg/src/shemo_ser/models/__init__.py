from shemo_ser.models.base import (
    FAMILIES,
    ModelSpec,
    ModelSpecError,
    TrainedModel,
    as_array,
    build,
    encode_labels,
    svm_fit,
)
from shemo_ser.models.checkpoint import CheckpointError, load, save
from shemo_ser.models.cnn import REFERENCE_LADDER, ProposedCnn, ShapeLadderError, cnn_forward, expected_ladder
from shemo_ser.models.svm import SvmClassifier
from shemo_ser.models.transfer import BackboneError, TransferNet, transfer_build

__all__ = [
    "FAMILIES",
    "REFERENCE_LADDER",
    "BackboneError",
    "CheckpointError",
    "ModelSpec",
    "ModelSpecError",
    "ProposedCnn",
    "ShapeLadderError",
    "SvmClassifier",
    "TrainedModel",
    "TransferNet",
    "as_array",
    "build",
    "cnn_forward",
    "encode_labels",
    "expected_ladder",
    "load",
    "save",
    "svm_fit",
    "transfer_build",
]
