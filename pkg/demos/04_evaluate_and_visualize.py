"""
Evaluation and visualisation
============================

Score a checkpoint on the held-out signer, then draw Grad-CAM overlays and
the attention timeline for one test clip. Pass the output directory of
03_train_toy_model.py; without it a briefly trained model is used.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from signrec.data import ClipLoader, DataConfig, display_frames
from signrec.evaluation import evaluate
from signrec.manifest import build_signer_independent_split, load_manifest
from signrec.model import ModelConfig, build_model, load_checkpoint
from signrec.synthetic import SyntheticCorpusConfig, generate_synthetic_corpus
from signrec.training import TrainConfig, train
from signrec.viz import attention_timeline, gradcam_map, render_overlay

if len(sys.argv) > 1:
    run = Path(sys.argv[1])
    manifest = load_manifest(run / "corpus" / "manifest.csv")
    model, _ = load_checkpoint(run / "cnn_fpm_lstm_attn" / "ckpt-best.pt")
    out = run / "viz"
else:
    out = Path(tempfile.mkdtemp())
    manifest = generate_synthetic_corpus(SyntheticCorpusConfig(seed=0), out / "corpus")
    cfg = ModelConfig(variant="cnn_fpm_lstm_attn", num_classes=10, hidden=64,
                      fpm_branch_channels=16, backbone="standin", backbone_channels=64,
                      finetune_last_k_conv=5)
    model = build_model(cfg)
    split = build_signer_independent_split(manifest, {"signer04"}, 0.2, seed=0)
    train(model, split, ClipLoader(manifest, DataConfig(frame_side=64)),
          TrainConfig(initial_lr=1e-3, reduced_lr=2e-4, max_epochs=3))

loader = ClipLoader(manifest, DataConfig(frame_side=64))
split = build_signer_independent_split(manifest, {"signer04"}, 0.1, seed=0)
report, preds = evaluate(model, loader, sorted(split.test_ids))
print("top-n rates on the held-out signer:", report.top_n_rates)
print("per-class top-1:", [None if a is None else round(a, 2) for a in report.per_sign_top1])
print("confusion matrix (rows: true class):")
print(report.confusion)

# Grad-CAM on the last backbone block and the attention weights over time.
sid = preds.sample_ids[0]
sample = loader.load(sid)
saliency = gradcam_map(model, sample.rgb, layer="rgb_backbone")
timeline = attention_timeline(model, sample.rgb)
print(f"{sid}: predicted {saliency.target_class}, true {sample.label}")
print("attention:", np.round(timeline.weights, 3))
print("attended frames:", np.flatnonzero(timeline.attended).tolist())
render_overlay(display_frames(manifest[sid], loader.config), saliency, timeline, out / sid,
               mark_attended=True)
print(f"overlays written to {out / sid}")
