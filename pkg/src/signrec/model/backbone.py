"""Per-frame convolutional feature extractors.

Both backbones map a ``3 x S x S`` frame to a ``C x S/16 x S/16`` feature map:
four 2x poolings followed by a final convolution block whose output is taken
before any fifth pooling.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import torch
import torch.nn as nn
from torchvision.models import vgg16

# torchvision vgg16().features[:30] ends with conv5_3 + ReLU, before pool5.
VGG16_FEATURE_END = 30


class Backbone(nn.Module):
    """Sequential conv stack with a last-k-convs fine-tuning policy.

    A frozen conv layer's following normalisation layer (if any) is frozen
    with it; GroupNorm keeps no running statistics, so only its affine
    parameters are affected.
    """

    def __init__(self, layers: nn.Sequential, out_channels: int, finetune_last_k_conv: int):
        super().__init__()
        self.layers = layers
        self.out_channels = out_channels
        self.stride = 16
        self.set_finetune(finetune_last_k_conv)

    def conv_layers(self) -> list[nn.Conv2d]:
        return [m for m in self.layers if isinstance(m, nn.Conv2d)]

    def set_finetune(self, k: int) -> None:
        convs = self.conv_layers()
        k = max(0, min(k, len(convs)))
        trainable = set(id(m) for m in convs[len(convs) - k:])
        flag = False
        for m in self.layers:
            if isinstance(m, nn.Conv2d):
                flag = id(m) in trainable
                for p in m.parameters():
                    p.requires_grad_(flag)
            elif isinstance(m, nn.GroupNorm):
                for p in m.parameters():
                    p.requires_grad_(flag)

    def frozen_parameters(self) -> list[nn.Parameter]:
        return [p for p in self.parameters() if not p.requires_grad]

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        if frames.shape[-3] != 3:
            raise ValueError(f"backbone expects 3-channel frames, got {frames.shape[-3]}")
        side = frames.shape[-1]
        if frames.shape[-2] != side or side % self.stride:
            raise ValueError(f"frames must be square with side a multiple of {self.stride}, "
                             f"got {tuple(frames.shape[-2:])}")
        return self.layers(frames)


def vgg16_backbone(finetune_last_k_conv: int = 2, weights_path: Optional[str] = None) -> Backbone:
    """VGG16 convolutional stack through conv5_3.

    ``weights_path`` may hold a full torchvision VGG16 state dict or one with
    only the convolutional part; without it the layers stay randomly
    initialised.
    """
    features = vgg16(weights=None).features[:VGG16_FEATURE_END]
    if weights_path is not None:
        state = torch.load(Path(weights_path), map_location="cpu", weights_only=True)
        state = {k.removeprefix("features."): v for k, v in state.items()
                 if not k.startswith("classifier.")}
        state = {k: v for k, v in state.items() if int(k.split(".")[0]) < VGG16_FEATURE_END}
        features.load_state_dict(state)
    return Backbone(features, 512, finetune_last_k_conv)


def standin_backbone(out_channels: int = 512, width: int = 16,
                     finetune_last_k_conv: int = 2, norm: bool = True) -> Backbone:
    """Small randomly initialised backbone with the VGG16 shape contract.

    Without pretrained weights the pooled features of a plain conv stack have
    a tiny dynamic range. ``norm`` adds a per-frame GroupNorm after each conv,
    which fixes that without batch statistics (so clips stay independent).
    """
    chans = [3, width, width * 2, width * 2, width * 4, out_channels]

    def block(cin, cout):
        extra = [nn.GroupNorm(min(8, cout), cout)] if norm else []
        return [nn.Conv2d(cin, cout, 3, padding=1), *extra, nn.ReLU(inplace=True)]

    layers = []
    for cin, cout in zip(chans[:-2], chans[1:-1]):
        layers += block(cin, cout) + [nn.MaxPool2d(2)]
    layers += block(chans[-2], chans[-1])
    for m in layers:
        if isinstance(m, nn.Conv2d):  # same scheme torchvision uses for VGG
            nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            nn.init.zeros_(m.bias)
    return Backbone(nn.Sequential(*layers), out_channels, finetune_last_k_conv)


def backbone_forward(frames: torch.Tensor, backbone: Backbone) -> torch.Tensor:
    """Apply ``backbone`` to every frame of ``T x 3 x S x S`` (or batched) input."""
    lead = frames.shape[:-3]
    out = backbone(frames.reshape(-1, *frames.shape[-3:]))
    return out.reshape(*lead, *out.shape[-3:])
