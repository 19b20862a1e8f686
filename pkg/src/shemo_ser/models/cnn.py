"""The proposed convolutional classifier over 300x300 feature maps."""

from __future__ import annotations

from collections.abc import Sequence

import torch
import torch.nn.functional as F
from torch import nn

# (stage name, channels, height/width) for a 300x300 input, then the head widths.
REFERENCE_LADDER = (
    ("conv1", 64, 300),
    ("conv2_x", 128, 150),
    ("conv3_x", 256, 75),
    ("conv4_x", 512, 37),
    ("conv5_x", 512, 18),
)
POOLED_CHANNELS = 1024
FC_UNITS = 64
CONVS_PER_STAGE = (1, 4, 4, 4, 2)
DROPOUT_RATES = (0.1, 0.2, 0.3, 0.4, 0.6)


class ShapeLadderError(AssertionError):
    pass


class HalvingMaxPool(nn.Module):
    """3x3 max pool, stride 2, padded by one on the bottom/right edge.

    Output side is ``n // 2`` (300 -> 150 -> 75 -> 37 -> 18). A 1-pixel map
    passes through unchanged so very small inputs still reach the head.
    """

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] < 2 or x.shape[-2] < 2:
            return x
        x = F.pad(x, (0, 1, 0, 1), value=float("-inf"))
        return F.max_pool2d(x, kernel_size=3, stride=2)


def conv_bn_relu(c_in: int, c_out: int, kernel: int = 3) -> list[nn.Module]:
    return [
        nn.Conv2d(c_in, c_out, kernel, stride=1, padding=kernel // 2, bias=False),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
    ]


def expected_ladder(input_size: int = 300, width_divisor: int = 1, n_classes: int = 5) -> list[tuple[int, ...]]:
    """Per-stage output shapes (without batch) the network must produce."""
    if input_size == 300:
        spatial = [side for _, _, side in REFERENCE_LADDER]
    else:
        spatial = [input_size]
        for _ in range(len(REFERENCE_LADDER) - 1):
            spatial.append(spatial[-1] // 2 if spatial[-1] >= 2 else spatial[-1])
    shapes: list[tuple[int, ...]] = [
        (c // width_divisor, s, s) for (_, c, _), s in zip(REFERENCE_LADDER, spatial)
    ]
    shapes += [(POOLED_CHANNELS // width_divisor,), (FC_UNITS,), (n_classes,)]
    return shapes


class ProposedCnn(nn.Module):
    """Five convolutional stages, a 1x1 widening to 1024 channels, global
    average pooling, a 64-unit dense layer and a 5-way output.

    Every convolution is followed by batch norm and ReLU. Stages 2-5 open
    with a halving max pool; dropout follows each pooling step with rates
    0.1, 0.2, 0.3, 0.4 and (after the global pool) 0.6. ``forward`` returns
    logits; use :func:`cnn_forward` for probabilities.
    """

    def __init__(
        self,
        input_size: int = 300,
        width_divisor: int = 1,
        dropout: Sequence[float] = DROPOUT_RATES,
        n_classes: int = 5,
        fc_units: int = FC_UNITS,
    ):
        super().__init__()
        if len(dropout) != 5:
            raise ValueError(f"need 5 dropout rates, got {len(dropout)}")
        self.input_size = input_size
        self.width_divisor = width_divisor
        self.n_classes = n_classes
        widths = [c // width_divisor for _, c, _ in REFERENCE_LADDER]
        if min(widths) < 1:
            raise ValueError(f"width_divisor {width_divisor} leaves a stage without channels")
        stages = []
        c_in = 1
        for k, (c_out, n_convs) in enumerate(zip(widths, CONVS_PER_STAGE)):
            layers: list[nn.Module] = []
            if k > 0:
                layers += [HalvingMaxPool(), nn.Dropout(dropout[k - 1])]
            for _ in range(n_convs):
                layers += conv_bn_relu(c_in, c_out)
                c_in = c_out
            stages.append(nn.Sequential(*layers))
        self.stages = nn.ModuleList(stages)
        pooled = POOLED_CHANNELS // width_divisor
        self.widen = nn.Sequential(*conv_bn_relu(c_in, pooled, kernel=1))
        self.pool = nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Dropout(dropout[4]))
        self.fc = nn.Sequential(nn.Linear(pooled, fc_units), nn.ReLU(inplace=True))
        self.classifier = nn.Linear(fc_units, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward_with_shapes(x)[0]

    def forward_with_shapes(self, x: torch.Tensor) -> tuple[torch.Tensor, list[tuple[int, ...]]]:
        shapes = []
        for stage in self.stages:
            x = stage(x)
            shapes.append(tuple(x.shape[1:]))
        x = self.pool(self.widen(x))
        shapes.append(tuple(x.shape[1:]))
        x = self.fc(x)
        shapes.append(tuple(x.shape[1:]))
        x = self.classifier(x)
        shapes.append(tuple(x.shape[1:]))
        return x, shapes

    def check_ladder(self) -> list[tuple[int, ...]]:
        """Run a probe forward pass and compare every stage shape with the expected ladder."""
        p = next(self.parameters())
        probe = torch.zeros(1, 1, self.input_size, self.input_size, dtype=p.dtype)
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                _, got = self.forward_with_shapes(probe)
        finally:
            self.train(was_training)
        want = expected_ladder(self.input_size, self.width_divisor, self.n_classes)
        if got != want:
            raise ShapeLadderError(f"stage shapes {got} do not match the expected ladder {want}")
        return got


def cnn_forward(model: nn.Module, batch: torch.Tensor) -> torch.Tensor:
    """Class probabilities for a ``(B, 1, S, S)`` batch."""
    size = getattr(model, "input_size", 300)
    if batch.ndim != 4 or tuple(batch.shape[1:]) != (1, size, size):
        raise ValueError(f"expected input of shape (B, 1, {size}, {size}), got {tuple(batch.shape)}")
    if not torch.isfinite(batch).all():
        raise ValueError("input batch contains non-finite values")
    return torch.softmax(model(batch), dim=1)
