"""
Training on the toy corpus
==========================

Train the attention model with the stand-in backbone until it fits its
training clips, then compare with the variant without attention.
Takes several minutes on one CPU core.
"""

import sys
import tempfile
from pathlib import Path

import torch

from signrec.data import ClipLoader, DataConfig
from signrec.manifest import build_signer_independent_split
from signrec.model import ModelConfig, build_model
from signrec.synthetic import SyntheticCorpusConfig, generate_synthetic_corpus
from signrec.training import TrainConfig, train

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
torch.set_num_threads(1)

manifest = generate_synthetic_corpus(
    SyntheticCorpusConfig(samples_per_signer_per_sign=5, seed=0), out / "corpus")
split = build_signer_independent_split(manifest, {"signer04"}, 0.1, seed=0)
loader = ClipLoader(manifest, DataConfig(frame_side=64))

# The schedule keeps its one-step plateau rule; the rates are raised for the
# randomly initialised toy network.
train_config = TrainConfig(initial_lr=1e-3, reduced_lr=2e-4, plateau_patience=30,
                           stop_patience=30, max_epochs=30, monitor_train_top1=True)

for variant in ("cnn_fpm_lstm_attn", "cnn_fpm_lstm"):
    cfg = ModelConfig(variant=variant, num_classes=10, hidden=64, fpm_branch_channels=16,
                      backbone="standin", backbone_channels=64, finetune_last_k_conv=5)
    _, state = train(build_model(cfg), split, loader, train_config, out_dir=out / variant,
                     on_epoch=lambda rec: rec["train_top1"] >= 0.95)
    for rec in state.history:
        print(f"{variant} epoch {rec['epoch']:2d}: loss {rec['train_loss']:.3f} "
              f"train top-1 {rec['train_top1']:.3f} val top-1 {rec['val_top1']:.3f}")
    print(f"checkpoints and log in {out / variant}\n")
