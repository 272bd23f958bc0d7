"""
Model anatomy
=============

Trace one clip through the five architectures and print the intermediate
shapes, first at full size (VGG16, 256 px) and then with the small stand-in
backbone used on the toy corpus.
"""

import torch

from signrec.model import VARIANTS, ModelConfig, build_model

torch.manual_seed(0)

# Full-size RGB-D model: 512-channel 16x16 maps, fused 1024-wide frame vectors.
cfg = ModelConfig(variant="cnn_fpm_blstm_attn", modalities=("rgb", "depth"), num_classes=226)
model = build_model(cfg, load_backbone_weights=False).eval()
clip = torch.randn(1, 3, 3, 256, 256)
with torch.no_grad():
    fm = model.backbones["rgb"](clip[0])
    print("backbone map per frame:", tuple(fm.shape[1:]))
    print("after FPM:             ", tuple(model.fpms["rgb"](fm).shape[1:]))
    states = model.encode(clip, clip)
    print("BLSTM states:          ", tuple(states.shape))
    logits, attn = model(clip, clip)
    print("logits:", tuple(logits.shape), " attention weights:", attn.weights.numpy().round(3))

trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
total = sum(p.numel() for p in model.parameters())
print(f"trainable parameters {trainable:,} of {total:,} (only the last backbone convs are tuned)")

# Toy scale: every variant on a 64 px clip.
for variant in VARIANTS:
    toy = ModelConfig(variant=variant, num_classes=10, hidden=64, fpm_branch_channels=16,
                      backbone="standin", backbone_channels=64)
    m = build_model(toy).eval()
    with torch.no_grad():
        logits, attn = m(torch.randn(12, 3, 64, 64))
    print(f"{variant:20s} logits {tuple(logits.shape)} attention {'yes' if attn is not None else 'no'}")
