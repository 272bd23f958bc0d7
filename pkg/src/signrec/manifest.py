"""Sample manifests and benchmark splits.

A manifest is a CSV file with one row per video sample::

    sample_id,signer_id,sign_id,background_id,rgb_path,depth_path,skeleton_path,num_frames

Empty strings mark absent optional fields. Sign names live in a sidecar text
file next to the CSV (``<stem>.signs.txt``, one name per line); without it the
class count is inferred from the largest ``sign_id``.
"""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

MANIFEST_COLUMNS = (
    "sample_id",
    "signer_id",
    "sign_id",
    "background_id",
    "rgb_path",
    "depth_path",
    "skeleton_path",
    "num_frames",
)

SIGNER_INDEPENDENT = "signer_independent"
RANDOM = "random"


class ManifestError(ValueError):
    """Raised for malformed or inconsistent manifest contents."""


class SplitError(ValueError):
    """Raised when a split cannot be built from the given arguments."""


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    signer_id: str
    sign_id: int
    background_id: str
    rgb_path: str
    depth_path: Optional[str] = None
    skeleton_path: Optional[str] = None
    num_frames: Optional[int] = None


@dataclass
class Manifest:
    records: list[SampleRecord]
    num_signs: int
    sign_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.num_signs < 1:
            raise ManifestError(f"num_signs must be positive, got {self.num_signs}")
        if not self.sign_names:
            self.sign_names = [f"sign_{k:03d}" for k in range(self.num_signs)]
        if len(self.sign_names) != self.num_signs:
            raise ManifestError(
                f"{len(self.sign_names)} sign names given for {self.num_signs} signs"
            )
        dupes = sorted(k for k, n in Counter(r.sample_id for r in self.records).items() if n > 1)
        if dupes:
            raise ManifestError(f"duplicate sample_id values: {', '.join(dupes)}")
        for r in self.records:
            if not 0 <= r.sign_id < self.num_signs:
                raise ManifestError(
                    f"sample {r.sample_id!r}: sign_id {r.sign_id} outside [0, {self.num_signs})"
                )
        self._index = {r.sample_id: r for r in self.records}

    def __len__(self):
        return len(self.records)

    def __getitem__(self, sample_id: str) -> SampleRecord:
        return self._index[sample_id]

    def __contains__(self, sample_id) -> bool:
        return sample_id in self._index

    @property
    def signers(self) -> list[str]:
        return sorted({r.signer_id for r in self.records})

    def ids_by_signer(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for r in self.records:
            out[r.signer_id].append(r.sample_id)
        return dict(out)


@dataclass(frozen=True)
class SplitSpec:
    train_ids: frozenset
    val_ids: frozenset
    test_ids: frozenset
    mode: str
    seed: int

    def __post_init__(self):
        if self.mode not in (SIGNER_INDEPENDENT, RANDOM):
            raise SplitError(f"unknown split mode {self.mode!r}")
        for a, b in ((self.train_ids, self.val_ids), (self.train_ids, self.test_ids),
                     (self.val_ids, self.test_ids)):
            if a & b:
                raise SplitError("split id sets overlap")

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "train": sorted(self.train_ids),
            "val": sorted(self.val_ids),
            "test": sorted(self.test_ids),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SplitSpec":
        return cls(
            train_ids=frozenset(obj["train"]),
            val_ids=frozenset(obj["val"]),
            test_ids=frozenset(obj["test"]),
            mode=obj["mode"],
            seed=int(obj["seed"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "SplitSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".signs.txt")


def _opt(value: str) -> Optional[str]:
    return value if value != "" else None


def load_manifest(path, num_signs: Optional[int] = None,
                  sign_names: Optional[Sequence[str]] = None) -> Manifest:
    """Read a manifest CSV.

    Relative modality paths are resolved against the CSV's directory. Errors
    name the offending (1-based, header excluded) row and field.
    """
    path = Path(path)
    base = path.parent
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MANIFEST_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ManifestError(f"{path}: header lacks columns {missing}")
        for row_no, row in enumerate(reader, start=1):
            for name in ("sample_id", "signer_id", "sign_id", "rgb_path"):
                if not row.get(name):
                    raise ManifestError(f"{path}: row {row_no}: field {name!r} is empty")
            try:
                sign_id = int(row["sign_id"])
            except ValueError:
                raise ManifestError(
                    f"{path}: row {row_no}: field 'sign_id' is not an integer: {row['sign_id']!r}"
                ) from None
            num_frames = None
            if row["num_frames"]:
                try:
                    num_frames = int(row["num_frames"])
                except ValueError:
                    num_frames = -1
                if num_frames < 1:
                    raise ManifestError(
                        f"{path}: row {row_no}: field 'num_frames' must be a positive integer"
                    )

            def resolve(p):
                if p is None:
                    return None
                return str(base / p) if not Path(p).is_absolute() else p

            records.append(SampleRecord(
                sample_id=row["sample_id"],
                signer_id=row["signer_id"],
                sign_id=sign_id,
                background_id=row["background_id"],
                rgb_path=resolve(row["rgb_path"]),
                depth_path=resolve(_opt(row["depth_path"])),
                skeleton_path=resolve(_opt(row["skeleton_path"])),
                num_frames=num_frames,
            ))

    if sign_names is None and _sidecar(path).exists():
        sign_names = [ln for ln in _sidecar(path).read_text(encoding="utf-8").splitlines() if ln]
    if sign_names is not None:
        num_signs = len(sign_names)
    if num_signs is None:
        num_signs = max((r.sign_id for r in records), default=0) + 1
    return Manifest(records=records, num_signs=num_signs,
                    sign_names=list(sign_names) if sign_names else [])


def write_manifest(manifest: Manifest, path) -> None:
    """Write ``manifest`` as CSV plus the sign-name sidecar.

    Paths inside ``path``'s directory are stored relative to it.
    """
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        if p is None:
            return ""
        try:
            return str(Path(p).resolve().relative_to(base))
        except ValueError:
            return str(p)

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in manifest.records:
            writer.writerow([
                r.sample_id, r.signer_id, r.sign_id, r.background_id,
                rel(r.rgb_path), rel(r.depth_path), rel(r.skeleton_path),
                "" if r.num_frames is None else r.num_frames,
            ])
    _sidecar(path).write_text("\n".join(manifest.sign_names) + "\n", encoding="utf-8")


def resolve_num_frames(record: SampleRecord) -> int:
    """Frame count of ``record``, counting files on disk when not recorded."""
    if record.num_frames is not None:
        return record.num_frames
    from .preprocessing import count_frames
    return count_frames(record.rgb_path)


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def build_signer_independent_split(manifest: Manifest, test_signers: Iterable[str],
                                   val_fraction: float, seed: int,
                                   val_by: str = "sample") -> SplitSpec:
    """Hold out every sample of ``test_signers``; split the rest into train/val.

    With ``val_by="sample"`` the validation draw is stratified by signer: each
    remaining signer gives ``round(val_fraction * n)`` of its samples to
    validation. With ``val_by="signer"``, ``round(val_fraction * n_signers)``
    whole signers (at least one, never all) form the validation set.
    """
    test_signers = set(test_signers)
    known = set(manifest.signers)
    if not test_signers:
        raise SplitError("test_signers is empty")
    unknown = sorted(test_signers - known)
    if unknown:
        raise SplitError(f"unknown test signers: {unknown}")
    if test_signers == known:
        raise SplitError("test_signers covers every signer; nothing left to train on")
    if not 0.0 < val_fraction < 1.0:
        raise SplitError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    if val_by not in ("sample", "signer"):
        raise SplitError(f"val_by must be 'sample' or 'signer', got {val_by!r}")

    rng = np.random.default_rng(seed)
    by_signer = manifest.ids_by_signer()
    if val_by == "signer":
        pool = sorted(known - test_signers)
        if len(pool) < 2:
            raise SplitError("per-signer validation needs at least two training signers")
        n_val = min(max(int(np.floor(val_fraction * len(pool) + 0.5)), 1), len(pool) - 1)
        val_signers = {pool[i] for i in rng.permutation(len(pool))[:n_val]}
        pick = lambda group: frozenset(i for s in group for i in by_signer[s])
        return SplitSpec(pick(set(pool) - val_signers), pick(val_signers), pick(test_signers),
                         mode=SIGNER_INDEPENDENT, seed=seed)

    train, val, test = set(), set(), set()
    for signer in sorted(by_signer):
        ids = sorted(by_signer[signer])
        if signer in test_signers:
            test.update(ids)
            continue
        perm = rng.permutation(len(ids))
        n_val = int(np.floor(val_fraction * len(ids) + 0.5))
        val.update(ids[i] for i in perm[:n_val])
        train.update(ids[i] for i in perm[n_val:])
    return SplitSpec(frozenset(train), frozenset(val), frozenset(test),
                     mode=SIGNER_INDEPENDENT, seed=seed)


def build_balanced_test(manifest: Manifest, split: SplitSpec, seed: int) -> set[str]:
    """Downsample each test signer to the smallest per-signer test count."""
    if split.mode != SIGNER_INDEPENDENT:
        raise SplitError("balanced test sets are defined for signer-independent splits")
    if not split.test_ids:
        raise SplitError("split has an empty test set")
    by_signer: dict[str, list[str]] = defaultdict(list)
    for sid in split.test_ids:
        by_signer[manifest[sid].signer_id].append(sid)
    target = min(len(v) for v in by_signer.values())
    rng = np.random.default_rng(seed)
    keep = set()
    for signer in sorted(by_signer):
        ids = sorted(by_signer[signer])
        if len(ids) == target:
            keep.update(ids)
        else:
            keep.update(ids[i] for i in rng.choice(len(ids), size=target, replace=False))
    return keep


def largest_remainder(n: int, fractions: Sequence[float]) -> list[int]:
    """Integer parts of ``n * fractions`` that sum exactly to ``n``."""
    quotas = [n * f for f in fractions]
    counts = [int(np.floor(q)) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def build_random_split(manifest: Manifest, fractions=(0.72, 0.13, 0.15),
                       seed: int = 0) -> SplitSpec:
    """Uniform random train/val/test partition of all samples."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise SplitError("fractions must have three entries (train, val, test)")
    if any(f <= 0 for f in fractions):
        raise SplitError(f"fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f"fractions must sum to 1, got {sum(fractions)!r}")
    ids = sorted(r.sample_id for r in manifest.records)
    n_train, n_val, _ = largest_remainder(len(ids), fractions)
    perm = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    return SplitSpec(
        frozenset(shuffled[:n_train]),
        frozenset(shuffled[n_train:n_train + n_val]),
        frozenset(shuffled[n_train + n_val:]),
        mode=RANDOM,
        seed=seed,
    )
