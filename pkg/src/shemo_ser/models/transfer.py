"""Frozen image-pretrained backbone with a small trainable head."""

from __future__ import annotations

import os
from collections.abc import Sequence
from pathlib import Path

import torch
from torch import nn

SCALES = tuple(f"b{k}" for k in range(8))


class BackboneError(Exception):
    pass


def stub_backbone() -> tuple[nn.Module, int]:
    """Small fixed conv trunk standing in for EfficientNet in hermetic runs."""
    trunk = nn.Sequential(
        nn.Conv2d(3, 8, 3, stride=2, padding=1, bias=False),
        nn.BatchNorm2d(8),
        nn.SiLU(),
        nn.Conv2d(8, 16, 3, stride=2, padding=1, bias=False),
        nn.BatchNorm2d(16),
        nn.SiLU(),
        nn.Conv2d(16, 32, 3, stride=2, padding=1, bias=False),
        nn.BatchNorm2d(32),
        nn.SiLU(),
    )
    return trunk, 32


def efficientnet_backbone(scale: str, artifact_path: str | os.PathLike | None) -> tuple[nn.Module, int]:
    """torchvision EfficientNet feature trunk, weights from a local state dict.

    ``artifact_path=None`` builds the architecture only; callers that are
    about to load a full checkpoint use this.
    """
    if scale not in SCALES:
        raise BackboneError(f"unknown EfficientNet scale {scale!r}; expected one of {SCALES}")
    from torchvision import models

    net = getattr(models, f"efficientnet_{scale}")(weights=None)
    if artifact_path is not None:
        path = Path(artifact_path)
        if not path.is_file():
            raise BackboneError(f"backbone artifact not found: {path}")
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise BackboneError(f"cannot read backbone artifact {path}: {exc}") from exc
        if isinstance(state, dict) and "state_dict" in state:
            state = state["state_dict"]
        features = {k[len("features."):]: v for k, v in state.items() if k.startswith("features.")}
        try:
            net.features.load_state_dict(features, strict=True)
        except RuntimeError as exc:
            raise BackboneError(f"{path} does not hold EfficientNet-{scale.upper()} weights: {exc}") from exc
    out_channels = net.features[-1][0].out_channels
    return net.features, out_channels


class TransferNet(nn.Module):
    """Single-channel map -> replicated to RGB -> frozen trunk -> dense head.

    The trunk never trains: its parameters have ``requires_grad=False`` and
    it stays in eval mode so batch-norm statistics are not updated either.
    """

    def __init__(self, backbone: nn.Module, backbone_channels: int, head_units: Sequence[int] = (64,), n_classes: int = 5):
        super().__init__()
        self.backbone = backbone
        for p in self.backbone.parameters():
            p.requires_grad_(False)
        layers: list[nn.Module] = [nn.AdaptiveAvgPool2d(1), nn.Flatten()]
        width = backbone_channels
        for units in head_units:
            layers += [nn.Linear(width, units), nn.ReLU(inplace=True)]
            width = units
        layers.append(nn.Linear(width, n_classes))
        self.head = nn.Sequential(*layers)
        self.n_classes = n_classes
        self.backbone.eval()

    def train(self, mode: bool = True):
        super().train(mode)
        self.backbone.eval()
        return self

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] == 1:
            x = x.expand(-1, 3, -1, -1)
        with torch.no_grad():
            feats = self.backbone(x)
        return self.head(feats)

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]


def transfer_build(
    scale: str = "b3",
    head: Sequence[int] = (64,),
    backbone: str = "reference",
    artifact_path: str | os.PathLike | None = None,
    n_classes: int = 5,
    load_weights: bool = True,
) -> TransferNet:
    if backbone == "stub":
        trunk, channels = stub_backbone()
    elif backbone == "reference":
        if load_weights and artifact_path is None:
            raise BackboneError(f"EfficientNet-{scale.upper()} needs a pretrained backbone artifact path")
        trunk, channels = efficientnet_backbone(scale, artifact_path if load_weights else None)
    else:
        raise BackboneError(f"unknown backbone kind {backbone!r}; expected 'reference' or 'stub'")
    return TransferNet(trunk, channels, head, n_classes)
