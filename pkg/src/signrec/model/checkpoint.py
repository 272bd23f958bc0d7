"""Single-file model checkpoints.

A checkpoint is a ``torch.save`` dictionary::

    {"format": "signrec-checkpoint", "version": 1,
     "model_config": {...}, "state": {name: tensor}, "extra": {...}}

``extra`` carries JSON-compatible metadata such as the data configuration.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import torch

from .network import ModelConfig, SignRecognizer, build_model

FORMAT = "signrec-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def checkpoint_dict(model: SignRecognizer, extra: Optional[dict] = None,
                    state: Optional[dict] = None) -> dict:
    state = model.state_dict() if state is None else state
    return {
        "format": FORMAT,
        "version": VERSION,
        "model_config": model.config.to_json(),
        "state": {k: v.detach().clone() for k, v in state.items()},
        "extra": dict(extra or {}),
    }


def save_checkpoint(path, model: SignRecognizer, extra: Optional[dict] = None,
                    state: Optional[dict] = None) -> None:
    torch.save(checkpoint_dict(model, extra, state), Path(path))


def model_from_checkpoint(ckpt: dict) -> SignRecognizer:
    if ckpt.get("format") != FORMAT:
        raise CheckpointError("not a signrec checkpoint")
    if ckpt.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {ckpt.get('version')}")
    config = ModelConfig.from_json(ckpt["model_config"])
    model = build_model(config, load_backbone_weights=False)
    expected = model.state_dict()
    state = ckpt["state"]
    problems = [f"missing {k}" for k in expected if k not in state]
    problems += [f"unexpected {k}" for k in state if k not in expected]
    problems += [f"{k}: shape {tuple(state[k].shape)} != {tuple(v.shape)}"
                 for k, v in expected.items() if k in state and state[k].shape != v.shape]
    if problems:
        raise CheckpointError("checkpoint does not match its config: " + "; ".join(problems))
    model.load_state_dict(state)
    return model


def load_checkpoint(path) -> tuple[SignRecognizer, dict]:
    """Return the rebuilt model and the checkpoint's ``extra`` metadata."""
    ckpt = torch.load(Path(path), map_location="cpu", weights_only=True)
    return model_from_checkpoint(ckpt), ckpt.get("extra", {})
