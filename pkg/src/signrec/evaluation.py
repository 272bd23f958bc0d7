"""Recognition rates, confusion matrices and evaluation reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import torch

from .data import ClipLoader
from .model.network import SignRecognizer


class EvaluationError(ValueError):
    pass


def rankings_from_logits(logits) -> np.ndarray:
    """Class indices sorted best-first; equal scores keep ascending index order."""
    logits = np.asarray(logits, dtype=np.float64)
    return np.argsort(-logits, axis=-1, kind="stable")


@dataclass
class PredictionSet:
    sample_ids: list
    rankings: np.ndarray      # n x K, each row a permutation of range(K)
    true_classes: np.ndarray  # n
    signer_ids: Optional[list] = None

    def __post_init__(self):
        self.rankings = np.asarray(self.rankings, dtype=np.int64)
        self.true_classes = np.asarray(self.true_classes, dtype=np.int64)
        n = len(self.sample_ids)
        if self.rankings.ndim != 2 or self.rankings.shape[0] != n or self.true_classes.shape != (n,):
            raise EvaluationError("sample_ids, rankings and true_classes disagree in length")
        k = self.rankings.shape[1]
        if n and not np.array_equal(np.sort(self.rankings, axis=1),
                                    np.broadcast_to(np.arange(k), self.rankings.shape)):
            raise EvaluationError("every ranking must be a permutation of the class indices")
        if n and ((self.true_classes < 0) | (self.true_classes >= k)).any():
            raise EvaluationError("true class outside the ranked classes")

    def __len__(self):
        return len(self.sample_ids)

    @property
    def num_classes(self) -> int:
        return self.rankings.shape[1]

    @property
    def predicted(self) -> np.ndarray:
        return self.rankings[:, 0]

    def subset(self, sample_ids: Iterable[str]) -> "PredictionSet":
        wanted = set(sample_ids)
        idx = [i for i, s in enumerate(self.sample_ids) if s in wanted]
        missing = wanted - {self.sample_ids[i] for i in idx}
        if missing:
            raise EvaluationError(f"no predictions for {sorted(missing)}")
        return PredictionSet(
            [self.sample_ids[i] for i in idx], self.rankings[idx], self.true_classes[idx],
            None if self.signer_ids is None else [self.signer_ids[i] for i in idx],
        )

    @classmethod
    def from_logits(cls, sample_ids, logits, true_classes, signer_ids=None) -> "PredictionSet":
        return cls(list(sample_ids), rankings_from_logits(logits), true_classes, signer_ids)


def top_n_rate(preds: PredictionSet, n: int) -> float:
    """Fraction of samples whose true class is among the first ``n`` ranked."""
    if n < 1:
        raise EvaluationError(f"n must be at least 1, got {n}")
    if len(preds) == 0:
        raise EvaluationError("empty prediction set")
    hits = (preds.rankings[:, :n] == preds.true_classes[:, None]).any(axis=1)
    return float(hits.mean())


def confusion_matrix(preds: PredictionSet) -> np.ndarray:
    """``K x K`` counts; cell (y, p) counts true class y predicted as p."""
    if len(preds) == 0:
        raise EvaluationError("empty prediction set")
    k = preds.num_classes
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (preds.true_classes, preds.predicted), 1)
    return cm


@dataclass
class EvalReport:
    top_n_rates: dict
    confusion: np.ndarray
    per_sign_top1: list   # None for classes without samples
    per_signer_top1: dict
    n_samples: int

    @property
    def top1(self) -> float:
        return self.top_n_rates[1]

    def to_json(self) -> dict:
        return {
            "top_n_rates": {str(k): v for k, v in self.top_n_rates.items()},
            "confusion": self.confusion.tolist(),
            "per_sign_top1": self.per_sign_top1,
            "per_signer_top1": self.per_signer_top1,
            "n_samples": self.n_samples,
        }


def build_report(preds: PredictionSet, ns: Sequence[int] = (1, 3, 5)) -> EvalReport:
    cm = confusion_matrix(preds)
    support = cm.sum(axis=1)
    per_sign = [float(cm[c, c] / support[c]) if support[c] else None for c in range(len(cm))]
    correct = preds.predicted == preds.true_classes
    per_signer = {}
    if preds.signer_ids is not None:
        signers = np.asarray(preds.signer_ids)
        for s in sorted(set(preds.signer_ids)):
            per_signer[s] = float(correct[signers == s].mean())
    return EvalReport(
        top_n_rates={n: top_n_rate(preds, n) for n in ns},
        confusion=cm,
        per_sign_top1=per_sign,
        per_signer_top1=per_signer,
        n_samples=len(preds),
    )


def _check_files(loader: ClipLoader, sample_ids: Sequence[str]) -> None:
    missing = []
    for sid in sample_ids:
        if sid not in loader.manifest:
            missing.append(sid)
            continue
        rec = loader.manifest[sid]
        paths = [rec.rgb_path]
        if "depth" in loader.modalities:
            paths.append(rec.depth_path)
        if any(p is None or not Path(p).exists() for p in paths):
            missing.append(sid)
    if missing:
        raise EvaluationError(f"missing sample files for: {', '.join(sorted(missing))}")


@torch.no_grad()
def predict(model: SignRecognizer, loader: ClipLoader, sample_ids: Sequence[str]) -> PredictionSet:
    """Inference (dropout off) over ``sample_ids`` in sorted order."""
    _check_files(loader, sample_ids)
    model.eval()
    ids, logits, labels = [], [], []
    for batch_ids, rgb, depth, y in loader.batches(sample_ids, 1):
        out, _ = model(rgb, depth)
        ids += batch_ids
        logits.append(out.double().numpy())
        labels += y.tolist()
    signers = [loader.manifest[s].signer_id for s in ids]
    return PredictionSet.from_logits(ids, np.concatenate(logits), labels, signers)


def evaluate(model: SignRecognizer, loader: ClipLoader,
             sample_ids: Sequence[str]) -> tuple[EvalReport, PredictionSet]:
    preds = predict(model, loader, sample_ids)
    return build_report(preds), preds


def evaluate_test_sets(model: SignRecognizer, loader: ClipLoader, test_ids: Sequence[str],
                       balanced_ids: Optional[Sequence[str]] = None
                       ) -> tuple[dict, PredictionSet]:
    """Reports for the full (imbalanced) test set and its balanced subset.

    Inference runs once; the balanced report rescores the subset.
    """
    preds = predict(model, loader, test_ids)
    reports = {"imbalanced": build_report(preds)}
    if balanced_ids is not None:
        if not set(balanced_ids) <= set(test_ids):
            raise EvaluationError("balanced ids must be a subset of the test ids")
        reports["balanced"] = build_report(preds.subset(balanced_ids))
    return reports, preds


def dump_predictions(preds: PredictionSet, path) -> None:
    """Write one JSON object per sample: id, signer, true class, full ranking."""
    with open(path, "w") as fh:
        for i, sid in enumerate(preds.sample_ids):
            fh.write(json.dumps({
                "sample_id": sid,
                "signer_id": None if preds.signer_ids is None else preds.signer_ids[i],
                "true_class": int(preds.true_classes[i]),
                "ranking": preds.rankings[i].tolist(),
            }) + "\n")


def load_predictions(path) -> PredictionSet:
    rows = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    signers = [r.get("signer_id") for r in rows]
    return PredictionSet(
        [r["sample_id"] for r in rows],
        np.array([r["ranking"] for r in rows], dtype=np.int64).reshape(len(rows), -1),
        [r["true_class"] for r in rows],
        None if any(s is None for s in signers) else signers,
    )
