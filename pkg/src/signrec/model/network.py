"""The five baseline architectures for RGB and RGB-D clips."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import torch
import torch.nn as nn

from .backbone import Backbone, backbone_forward, standin_backbone, vgg16_backbone
from .components import (
    AttentionOutput,
    BLSTMEncoder,
    FeaturePoolingModule,
    LSTMEncoder,
    TemporalAttention,
    classify,
    global_average_pool,
    late_fuse,
)

VARIANTS = (
    "cnn_lstm",
    "cnn_fpm_lstm",
    "cnn_lstm_attn",
    "cnn_fpm_lstm_attn",
    "cnn_fpm_blstm_attn",
)


@dataclass
class ModelConfig:
    """Architecture selection.

    ``backbone`` is ``"vgg16"`` (optionally loading ``backbone_weights``) or
    ``"standin"``, a small random network with the same output geometry and
    ``backbone_channels`` output planes.
    """

    variant: str = "cnn_fpm_blstm_attn"
    modalities: tuple = ("rgb",)
    num_classes: int = 226
    hidden: int = 512
    fpm_branch_channels: int = 128
    dropout: float = 0.25
    finetune_last_k_conv: int = 2
    backbone: str = "vgg16"
    backbone_weights: Optional[str] = None
    backbone_channels: int = 512
    standin_width: int = 16
    standin_norm: bool = True
    init_state_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.modalities = tuple(self.modalities)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.modalities not in (("rgb",), ("rgb", "depth")):
            raise ValueError(f"modalities must be ('rgb',) or ('rgb', 'depth'), got {self.modalities}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if self.backbone not in ("vgg16", "standin"):
            raise ValueError(f"unknown backbone {self.backbone!r}")

    @property
    def uses_fpm(self) -> bool:
        return "_fpm_" in self.variant

    @property
    def uses_attention(self) -> bool:
        return self.variant.endswith("_attn")

    @property
    def bidirectional(self) -> bool:
        return "_blstm" in self.variant

    @property
    def uses_depth(self) -> bool:
        return "depth" in self.modalities

    def to_json(self) -> dict:
        d = asdict(self)
        d["modalities"] = list(self.modalities)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "ModelConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


class SignRecognizer(nn.Module):
    """backbone -> [FPM] -> GAP -> [late fusion] -> dropout -> (B)LSTM
    -> {last state | attention context} -> dropout -> linear classifier.

    One backbone (and FPM) per modality; RGB and depth do not share weights.
    """

    def __init__(self, config: ModelConfig, load_backbone_weights: bool = True):
        super().__init__()
        self.config = config
        self.backbones = nn.ModuleDict({m: self._make_backbone(load_backbone_weights)
                                        for m in config.modalities})
        feat = self.backbones["rgb"].out_channels
        if config.uses_fpm:
            self.fpms = nn.ModuleDict({m: FeaturePoolingModule(feat, config.fpm_branch_channels)
                                       for m in config.modalities})
            feat = self.fpms["rgb"].out_channels
        else:
            self.fpms = None
        self.frame_features = feat
        seq_in = feat * len(config.modalities)
        self.input_dropout = nn.Dropout(config.dropout)
        encoder_cls = BLSTMEncoder if config.bidirectional else LSTMEncoder
        self.encoder = encoder_cls(seq_in, config.hidden, config.init_state_std)
        d = self.encoder.out_features
        self.attention = TemporalAttention(d) if config.uses_attention else None
        self.output_dropout = nn.Dropout(config.dropout)
        self.classifier = nn.Linear(d, config.num_classes)

    def _make_backbone(self, load_weights: bool) -> Backbone:
        c = self.config
        if c.backbone == "vgg16":
            return vgg16_backbone(c.finetune_last_k_conv,
                                  c.backbone_weights if load_weights else None)
        return standin_backbone(c.backbone_channels, c.standin_width, c.finetune_last_k_conv,
                                c.standin_norm)

    def feature_layers(self) -> dict[str, nn.Module]:
        """Convolutional layers addressable by name (for saliency maps)."""
        layers = {}
        for m in self.config.modalities:
            layers[f"{m}_backbone"] = self.backbones[m]
            if self.fpms is not None:
                layers[f"{m}_fpm"] = self.fpms[m]
        return layers

    def pooled_features(self, clip: torch.Tensor, modality: str) -> torch.Tensor:
        """``B x T x 3 x S x S`` -> ``B x T x c`` per-frame pooled features."""
        fm = backbone_forward(clip, self.backbones[modality])
        if self.fpms is not None:
            fm = self.fpms[modality](fm.reshape(-1, *fm.shape[-3:])).reshape(
                *fm.shape[:-3], -1, *fm.shape[-2:])
        return global_average_pool(fm)

    def encode(self, rgb: torch.Tensor, depth: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Hidden states ``B x T x d`` for a batch of clips."""
        feats = self.pooled_features(rgb, "rgb")
        if self.config.uses_depth:
            if depth is None:
                raise ValueError("this model needs a depth clip")
            if depth.shape[:2] != rgb.shape[:2]:
                raise ValueError(f"rgb clip {tuple(rgb.shape[:2])} and depth clip "
                                 f"{tuple(depth.shape[:2])} differ in batch/length")
            feats = late_fuse(feats, self.pooled_features(depth, "depth"))
        return self.encoder(self.input_dropout(feats))

    def forward(self, rgb: torch.Tensor, depth: Optional[torch.Tensor] = None
                ) -> tuple[torch.Tensor, Optional[AttentionOutput]]:
        """Logits ``B x K`` and, for attention variants, the attention output.

        Unbatched ``T x 3 x S x S`` clips are accepted and yield unbatched
        results.
        """
        unbatched = rgb.dim() == 4
        if unbatched:
            rgb = rgb.unsqueeze(0)
            depth = depth.unsqueeze(0) if depth is not None else None
        states = self.encode(rgb, depth)
        attn = None
        if self.attention is not None:
            attn = self.attention(states)
            summary = attn.context
        else:
            summary = states[:, -1]
        logits = classify(self.output_dropout(summary), self.classifier.weight,
                          self.classifier.bias)
        if unbatched:
            logits = logits[0]
            if attn is not None:
                attn = AttentionOutput(attn.context[0], attn.weights[0], attn.scores[0])
        return logits, attn


def build_model(config: ModelConfig, load_backbone_weights: bool = True) -> SignRecognizer:
    """Construct a model with parameters drawn deterministically from ``config.seed``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        return SignRecognizer(config, load_backbone_weights)


def model_forward(rgb, depth, config: ModelConfig, model: SignRecognizer):
    if model.config != config:
        raise ValueError("model was built for a different configuration")
    return model(rgb, depth)
