"""Command-line entry points: ``python -m signrec <command> ...``.

Commands
--------
synth      generate the synthetic gesture corpus
split      build a signer-independent or random split (plus balanced test ids)
train      train a model from JSON configs
evaluate   score a checkpoint on the test set and its balanced subset
visualize  Grad-CAM overlays and the attention timeline for one sample
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import ClipLoader, DataConfig, display_frames
from .evaluation import dump_predictions, evaluate_test_sets
from .manifest import (
    RANDOM,
    SIGNER_INDEPENDENT,
    ManifestError,
    SplitError,
    SplitSpec,
    build_balanced_test,
    build_random_split,
    build_signer_independent_split,
    load_manifest,
)
from .model import ModelConfig, build_model, load_checkpoint
from .preprocessing import ClipError
from .synthetic import SyntheticCorpusConfig, generate_synthetic_corpus
from .training import TrainConfig, train
from .viz import attention_timeline, gradcam_map, render_overlay


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def cmd_synth(args) -> int:
    config = SyntheticCorpusConfig.load(args.config) if args.config else SyntheticCorpusConfig()
    manifest = generate_synthetic_corpus(config, args.out)
    print(f"wrote {len(manifest)} samples to {Path(args.out) / 'manifest.csv'}")
    return 0


def cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.mode == SIGNER_INDEPENDENT:
        if not args.test_signers:
            raise SplitError("--test-signers is required for signer-independent splits")
        signers = [s for s in args.test_signers.split(",") if s]
        split = build_signer_independent_split(manifest, signers, args.val_fraction, args.seed,
                                               val_by=args.val_by)
    else:
        split = build_random_split(manifest, seed=args.seed)
    split.save(args.out)
    summary = f"train {len(split.train_ids)}, val {len(split.val_ids)}, test {len(split.test_ids)}"
    if args.mode == SIGNER_INDEPENDENT:
        balanced = sorted(build_balanced_test(manifest, split, args.seed))
        path = Path(args.out).with_suffix(".balanced.json")
        _write_json(path, balanced)
        summary += f", balanced test {len(balanced)} ({path})"
    print(summary)
    return 0


def cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    split = SplitSpec.load(args.split)
    model_config = ModelConfig.load(args.model_config)
    train_config = TrainConfig.load(args.train_config)
    data_config = DataConfig.load(args.data_config) if args.data_config else DataConfig()
    loader = ClipLoader(manifest, data_config, model_config.modalities)
    model = build_model(model_config)
    _, state = train(model, split, loader, train_config, out_dir=args.out)
    print(f"trained {state.epoch} epochs; best val top-1 {state.best_val_metric:.4f}; "
          f"checkpoints in {args.out}")
    return 0


def _load_for_inference(checkpoint, manifest_path):
    model, extra = load_checkpoint(checkpoint)
    data_config = DataConfig.from_json(extra["data_config"]) if "data_config" in extra else DataConfig()
    manifest = load_manifest(manifest_path)
    return model, ClipLoader(manifest, data_config, model.config.modalities)


def cmd_evaluate(args) -> int:
    model, loader = _load_for_inference(args.checkpoint, args.manifest)
    split = SplitSpec.load(args.split)
    balanced = json.loads(Path(args.balanced_ids).read_text()) if args.balanced_ids else None
    reports, preds = evaluate_test_sets(model, loader, sorted(split.test_ids), balanced)
    _write_json(args.out, {name: r.to_json() for name, r in reports.items()})
    if args.dump_predictions:
        dump_predictions(preds, args.dump_predictions)
    for name, r in reports.items():
        rates = ", ".join(f"top-{n} {v:.4f}" for n, v in r.top_n_rates.items())
        print(f"{name}: {r.n_samples} samples, {rates}")
    return 0


def cmd_visualize(args) -> int:
    model, loader = _load_for_inference(args.checkpoint, args.manifest)
    sample = loader.load(args.sample_id)
    if args.target_class in ("predicted", "true"):
        target = sample.label if args.target_class == "true" else "predicted"
    else:
        target = int(args.target_class)
    saliency = gradcam_map(model, sample.rgb, sample.depth, target, args.layer)
    timeline = attention_timeline(model, sample.rgb, sample.depth) if model.attention else None
    frames = display_frames(loader.manifest[args.sample_id], loader.config)
    written = render_overlay(frames, saliency, timeline, args.out, mark_attended=True)
    if timeline is None:
        print("model has no temporal attention; timeline skipped")
    print(f"wrote {len(written)} files to {args.out} (target class {saliency.target_class})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signrec", description="Isolated sign recognition toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic gesture corpus")
    p.add_argument("--config", help="SyntheticCorpusConfig JSON (defaults if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="build a train/val/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=[SIGNER_INDEPENDENT, RANDOM], default=SIGNER_INDEPENDENT)
    p.add_argument("--test-signers", help="comma-separated signer ids held out for testing")
    p.add_argument("--val-fraction", type=float, default=0.15)
    p.add_argument("--val-by", choices=["sample", "signer"], default="sample",
                   help="draw validation samples within each signer, or hold out whole signers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="split JSON path")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--model-config", required=True)
    p.add_argument("--train-config", required=True)
    p.add_argument("--data-config", help="DataConfig JSON (defaults if omitted)")
    p.add_argument("--out", required=True, help="run directory for log and checkpoints")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--balanced-ids", help="JSON list of balanced test ids")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--dump-predictions", help="write per-sample rankings as JSON lines")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("visualize", help="saliency overlays and attention timeline")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--sample-id", required=True)
    p.add_argument("--layer", default="rgb_backbone")
    p.add_argument("--target-class", default="predicted",
                   help="'predicted', 'true' or a class index")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_visualize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ManifestError, SplitError, ClipError, ValueError, OSError, KeyError) as exc:
        print(f"signrec {args.command}: error: {exc}", file=sys.stderr)
        return 2
