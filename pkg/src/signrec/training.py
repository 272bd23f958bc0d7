"""Training loop with a one-step plateau schedule and early stopping.

Schedule: train at ``initial_lr``; once validation top-1 has not improved for
``plateau_patience`` epochs, drop to ``reduced_lr`` (once) and reset the
stall counter; after ``stop_patience`` further stalled epochs, stop.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .data import ClipLoader
from .manifest import SplitSpec
from .model.checkpoint import checkpoint_dict
from .model.network import SignRecognizer

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    initial_lr: float = 1e-5
    reduced_lr: float = 2e-6
    plateau_patience: int = 10
    stop_patience: int = 10
    batch_size: int = 1
    max_epochs: int = 200
    seed: int = 0
    monitor_train_top1: bool = False

    def __post_init__(self):
        if not 0 < self.reduced_lr < self.initial_lr:
            raise ValueError("need 0 < reduced_lr < initial_lr")
        if self.plateau_patience < 1 or self.stop_patience < 1:
            raise ValueError("patience values must be at least 1")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("batch_size must be positive and max_epochs non-negative")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls(**json.loads(Path(path).read_text()))


def montalbano_train_config(**overrides) -> TrainConfig:
    """Fixed-length setting: batches of 16 clips, initial rate 1e-4."""
    return TrainConfig(**{"initial_lr": 1e-4, "batch_size": 16, **overrides})


@dataclass
class TrainState:
    epoch: int = 0
    current_lr: float = 1e-5
    best_val_metric: float = -math.inf
    epochs_since_improvement: int = 0
    lr_reduced: bool = False
    history: list = field(default_factory=list)


def initial_state(config: TrainConfig) -> TrainState:
    return TrainState(current_lr=config.initial_lr)


def compute_loss(logits: torch.Tensor, true_class) -> torch.Tensor:
    """Cross-entropy (``-log softmax(logits)[true_class]``), averaged over a batch."""
    single = logits.dim() == 1
    if single:
        logits = logits.unsqueeze(0)
    target = torch.as_tensor(true_class, dtype=torch.long).reshape(-1)
    if target.numel() != logits.shape[0]:
        raise ValueError(f"{target.numel()} labels for {logits.shape[0]} logit rows")
    if ((target < 0) | (target >= logits.shape[1])).any():
        raise ValueError(f"class index out of range [0, {logits.shape[1]}): {target.tolist()}")
    return F.cross_entropy(logits, target)


def lr_schedule_step(state: TrainState, val_metric: float, config: TrainConfig) -> TrainState:
    """Advance the schedule by one epoch's validation result."""
    if val_metric > state.best_val_metric:
        best, since = val_metric, 0
    else:
        best, since = state.best_val_metric, state.epochs_since_improvement + 1
    lr, reduced = state.current_lr, state.lr_reduced
    if since >= config.plateau_patience and not reduced:
        lr, reduced, since = config.reduced_lr, True, 0
    return dataclasses.replace(state, current_lr=lr, best_val_metric=best,
                               epochs_since_improvement=since, lr_reduced=reduced,
                               history=list(state.history))


def early_stop_check(state: TrainState, config: TrainConfig) -> bool:
    return state.lr_reduced and state.epochs_since_improvement >= config.stop_patience


def train_epoch(model: SignRecognizer, loader: ClipLoader, sample_ids: Sequence[str],
                optimizer: torch.optim.Optimizer, batch_size: int,
                rng: np.random.Generator, epoch: int = 0) -> float:
    """One shuffled pass with a parameter update per batch; returns mean loss."""
    model.train()
    total, count = 0.0, 0
    for ids, rgb, depth, labels in loader.batches(sample_ids, batch_size, rng):
        optimizer.zero_grad()
        logits, _ = model(rgb, depth)
        loss = compute_loss(logits, labels)
        if not torch.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, samples {ids}")
        loss.backward()
        optimizer.step()
        total += loss.item() * len(ids)
        count += len(ids)
    return total / max(count, 1)


@torch.no_grad()
def score(model: SignRecognizer, loader: ClipLoader, sample_ids: Sequence[str],
          batch_size: int = 1) -> tuple[float, float]:
    """Mean loss and top-1 accuracy with dropout disabled."""
    model.eval()
    total, hits, count = 0.0, 0, 0
    for ids, rgb, depth, labels in loader.batches(sample_ids, batch_size):
        logits, _ = model(rgb, depth)
        total += compute_loss(logits, labels).item() * len(ids)
        hits += int((logits.argmax(dim=1) == labels).sum())
        count += len(ids)
    if count == 0:
        raise ValueError("no samples to score")
    return total / count, hits / count


def train(model: SignRecognizer, split: SplitSpec, loader: ClipLoader, config: TrainConfig,
          out_dir=None, on_epoch: Optional[Callable[[dict], bool]] = None
          ) -> tuple[dict, TrainState]:
    """Train ``model`` in place; return the best-by-validation checkpoint and final state.

    With ``out_dir`` set, writes ``log.jsonl`` (one record per epoch) and the
    checkpoints ``ckpt-best.pt`` / ``ckpt-last.pt`` after every epoch.
    ``on_epoch`` receives each epoch record; returning True ends training.
    """
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=config.initial_lr)
    state = initial_state(config)
    best_state = copy.deepcopy(model.state_dict())
    extra = {"data_config": loader.config.to_json(), "train_config": config.to_json()}
    best_extra = dict(extra, epoch=0)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "log.jsonl").write_text("")

    for epoch in range(1, config.max_epochs + 1):
        lr = state.current_lr
        train_loss = train_epoch(model, loader, split.train_ids, optimizer,
                                 config.batch_size, rng, epoch)
        val_loss, val_top1 = score(model, loader, split.val_ids, config.batch_size)
        record = {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss,
                  "val_top1": val_top1, "lr": lr}
        if config.monitor_train_top1:
            record["train_top1"] = score(model, loader, split.train_ids, config.batch_size)[1]

        previous_best = state.best_val_metric
        state = lr_schedule_step(state, val_top1, config)
        state.epoch = epoch
        state.history.append(record)
        improved = state.best_val_metric > previous_best
        if improved:
            best_state = copy.deepcopy(model.state_dict())
            best_extra = dict(extra, epoch=epoch, val_top1=val_top1)
        for group in optimizer.param_groups:
            group["lr"] = state.current_lr
        log.info("epoch %d: %s", epoch, record)

        if out is not None:
            with (out / "log.jsonl").open("a") as fh:
                fh.write(json.dumps(record) + "\n")
            torch.save(checkpoint_dict(model, dict(extra, epoch=epoch)), out / "ckpt-last.pt")
            if improved:
                torch.save(checkpoint_dict(model, best_extra, best_state), out / "ckpt-best.pt")

        if early_stop_check(state, config):
            log.info("stopping after epoch %d", epoch)
            break
        if on_epoch is not None and on_epoch(record):
            log.info("stopped by callback after epoch %d", epoch)
            break

    return checkpoint_dict(model, best_extra, best_state), state
