"""Network building blocks.

Feature maps follow torch layout: a frame's map is ``C x h x w`` and a clip's
is ``T x C x h x w`` (with an optional leading batch axis). Sequences are
``B x T x n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F


class AttentionParams(NamedTuple):
    v: torch.Tensor  # d
    W: torch.Tensor  # d x d
    b: torch.Tensor  # d


@dataclass
class AttentionOutput:
    context: torch.Tensor  # B x d
    weights: torch.Tensor  # B x T
    scores: torch.Tensor   # B x T


def temporal_attention(states: torch.Tensor, params: AttentionParams) -> AttentionOutput:
    """Additive attention over hidden states.

    ``e_i = v . tanh(W h_i + b)``, ``alpha = softmax(e)`` over time and
    ``context = sum_i alpha_i h_i``. ``states`` is ``T x d`` or ``B x T x d``.
    """
    squeeze = states.dim() == 2
    if squeeze:
        states = states.unsqueeze(0)
    if states.dim() != 3:
        raise ValueError(f"states must be T x d or B x T x d, got {tuple(states.shape)}")
    d = states.shape[-1]
    if params.W.shape != (d, d) or params.v.shape != (d,) or params.b.shape != (d,):
        raise ValueError(
            f"attention params (v {tuple(params.v.shape)}, W {tuple(params.W.shape)}, "
            f"b {tuple(params.b.shape)}) do not match hidden size {d}"
        )
    if states.shape[1] < 1:
        raise ValueError("attention needs at least one time step")
    scores = torch.tanh(F.linear(states, params.W, params.b)) @ params.v
    weights = torch.softmax(scores, dim=1)
    context = torch.einsum("bt,btd->bd", weights, states)
    out = AttentionOutput(context, weights, scores)
    if squeeze:
        out = AttentionOutput(context[0], weights[0], scores[0])
    return out


class TemporalAttention(nn.Module):
    def __init__(self, hidden: int):
        super().__init__()
        self.v = nn.Parameter(torch.empty(hidden))
        self.W = nn.Parameter(torch.empty(hidden, hidden))
        self.b = nn.Parameter(torch.empty(hidden))
        self.reset_parameters()

    def reset_parameters(self):
        bound = 1.0 / math.sqrt(self.W.shape[1])
        for p in (self.v, self.W, self.b):
            nn.init.uniform_(p, -bound, bound)

    @property
    def params(self) -> AttentionParams:
        return AttentionParams(self.v, self.W, self.b)

    def forward(self, states):
        return temporal_attention(states, self.params)


class FeaturePoolingModule(nn.Module):
    """Four parallel branches concatenated along channels.

    Branch order: dilated 2x2 max-pool + 1x1 conv, 3x3 conv, 3x3 conv with
    dilation 2, 3x3 conv with dilation 4. Every branch preserves spatial size.
    """

    def __init__(self, in_channels: int, branch_channels: int = 128):
        super().__init__()
        self.in_channels = in_channels
        # kernel 2 at dilation 2 spans 3 pixels: stride 1 + padding 1 keeps h x w
        self.pool = nn.MaxPool2d(kernel_size=2, stride=1, padding=1, dilation=2)
        self.pool_proj = nn.Conv2d(in_channels, branch_channels, 1)
        self.conv3 = nn.Conv2d(in_channels, branch_channels, 3, padding=1)
        self.dil2 = nn.Conv2d(in_channels, branch_channels, 3, padding=2, dilation=2)
        self.dil4 = nn.Conv2d(in_channels, branch_channels, 3, padding=4, dilation=4)

    @property
    def out_channels(self) -> int:
        return 4 * self.conv3.out_channels

    def branches(self):
        return {
            "pool": lambda x: self.pool_proj(self.pool(x)),
            "conv3": self.conv3,
            "dil2": self.dil2,
            "dil4": self.dil4,
        }

    def forward(self, x):
        if x.shape[-3] != self.in_channels:
            raise ValueError(f"FPM expects {self.in_channels} channels, got {x.shape[-3]}")
        return torch.cat([branch(x) for branch in self.branches().values()], dim=-3)


def fpm_forward(fm: torch.Tensor, fpm: FeaturePoolingModule) -> torch.Tensor:
    return fpm(fm)


def global_average_pool(fm: torch.Tensor) -> torch.Tensor:
    """Mean over the two trailing spatial axes."""
    return fm.mean(dim=(-2, -1))


def late_fuse(rgb_vec: torch.Tensor, depth_vec: torch.Tensor) -> torch.Tensor:
    """Concatenate per-modality vectors, RGB first."""
    if rgb_vec.shape != depth_vec.shape:
        raise ValueError(f"cannot fuse vectors of shapes {tuple(rgb_vec.shape)} "
                         f"and {tuple(depth_vec.shape)}")
    return torch.cat([rgb_vec, depth_vec], dim=-1)


def lstm_encode(seq: torch.Tensor, cell: nn.LSTMCell,
                init_state: tuple[torch.Tensor, torch.Tensor]) -> torch.Tensor:
    """Run ``cell`` over ``seq`` (``B x T x n``) and return all hidden states.

    ``init_state`` holds ``(h0, c0)``, each ``d`` or ``B x d``.
    """
    if seq.dim() != 3:
        raise ValueError(f"sequence must be B x T x n, got {tuple(seq.shape)}")
    if seq.shape[1] < 1:
        raise ValueError("sequence has no time steps")
    if torch.isnan(seq).any():
        raise ValueError("sequence contains NaN")
    batch = seq.shape[0]
    h, c = (s.expand(batch, -1) if s.dim() == 1 else s for s in init_state)
    states = []
    for t in range(seq.shape[1]):
        h, c = cell(seq[:, t], (h, c))
        states.append(h)
    return torch.stack(states, dim=1)


def blstm_encode(seq: torch.Tensor, cell_fwd: nn.LSTMCell, cell_bwd: nn.LSTMCell,
                 init_fwd, init_bwd) -> torch.Tensor:
    """Per-step concatenation of a forward pass and a time-reversed pass."""
    fwd = lstm_encode(seq, cell_fwd, init_fwd)
    bwd = lstm_encode(seq.flip(1), cell_bwd, init_bwd).flip(1)
    return torch.cat([fwd, bwd], dim=-1)


class LSTMEncoder(nn.Module):
    """LSTM cell unrolled over time with a fixed random initial state.

    The initial ``(h0, c0)`` is drawn once from N(0, init_std^2) and kept as
    a buffer, so it is saved with the model but never trained.
    """

    def __init__(self, input_size: int, hidden: int, init_std: float = 0.1):
        super().__init__()
        self.cell = nn.LSTMCell(input_size, hidden)
        self.register_buffer("h0", torch.randn(hidden) * init_std)
        self.register_buffer("c0", torch.randn(hidden) * init_std)

    @property
    def out_features(self) -> int:
        return self.cell.hidden_size

    def forward(self, seq):
        return lstm_encode(seq, self.cell, (self.h0, self.c0))


class BLSTMEncoder(nn.Module):
    def __init__(self, input_size: int, hidden: int, init_std: float = 0.1):
        super().__init__()
        self.fwd = LSTMEncoder(input_size, hidden, init_std)
        self.bwd = LSTMEncoder(input_size, hidden, init_std)

    @property
    def out_features(self) -> int:
        return 2 * self.fwd.out_features

    def forward(self, seq):
        return blstm_encode(seq, self.fwd.cell, self.bwd.cell,
                            (self.fwd.h0, self.fwd.c0), (self.bwd.h0, self.bwd.c0))


def classify(feature: torch.Tensor, weight: torch.Tensor,
             bias: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Affine map to class logits (no softmax)."""
    if feature.shape[-1] != weight.shape[1]:
        raise ValueError(f"feature width {feature.shape[-1]} does not match "
                         f"classifier input {weight.shape[1]}")
    return F.linear(feature, weight, bias)
