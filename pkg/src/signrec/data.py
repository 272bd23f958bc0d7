"""Preprocessing pipeline turning manifest samples into model-ready tensors."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
import torch

from .manifest import Manifest
from .preprocessing import (
    DEPTH,
    IMAGENET_MEAN,
    IMAGENET_STD,
    RGB,
    ClipTensor,
    crop_about_joint,
    decode_clip,
    load_skeleton,
    normalize,
    replicate_depth_channels,
    resample_frames,
    resize_frames,
    scale_depth,
)


@dataclass
class DataConfig:
    """How clips are prepared before entering the network.

    ``fixed_length`` switches on temporal resampling (fixed-length batches);
    ``crop_size``/``crop_joint`` switch on joint-centred cropping, which
    needs a skeleton file per sample.
    """

    frame_side: int = 256
    fixed_length: Optional[int] = None
    crop_size: Optional[int] = None
    crop_joint: int = 2
    rgb_mean: Sequence[float] = IMAGENET_MEAN
    rgb_std: Sequence[float] = IMAGENET_STD
    depth_mean: Sequence[float] = IMAGENET_MEAN
    depth_std: Sequence[float] = IMAGENET_STD

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("rgb_mean", "rgb_std", "depth_mean", "depth_std"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "DataConfig":
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "DataConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


def montalbano_data_config() -> DataConfig:
    """Shoulder-centred 400 px crop, 40 frames, resized to 256 px."""
    return DataConfig(frame_side=256, fixed_length=40, crop_size=400, crop_joint=2)


def prepare_clip(clip: ClipTensor, config: DataConfig, track=None) -> ClipTensor:
    if config.crop_size is not None:
        if track is None:
            raise ValueError("cropping is configured but the sample has no skeleton track")
        clip = crop_about_joint(clip, track, config.crop_joint, config.crop_size)
    if clip.modality == DEPTH:
        clip = scale_depth(clip)
    clip = resize_frames(clip, config.frame_side)
    if config.fixed_length is not None:
        clip = resample_frames(clip, config.fixed_length)
    if clip.modality == DEPTH:
        clip = replicate_depth_channels(clip)
        return normalize(clip, config.depth_mean, config.depth_std)
    return normalize(clip, config.rgb_mean, config.rgb_std)


def display_frames(record, config: DataConfig) -> np.ndarray:
    """RGB frames with the model input's geometry, as ``T x S x S x 3`` uint8."""
    clip = decode_clip(record, RGB)
    if config.crop_size is not None:
        if record.skeleton_path is None:
            raise ValueError(f"sample {record.sample_id!r} has no skeleton file for cropping")
        track = load_skeleton(record.skeleton_path, num_frames=clip.num_frames)
        clip = crop_about_joint(clip, track, config.crop_joint, config.crop_size)
    clip = resize_frames(clip, config.frame_side)
    if config.fixed_length is not None:
        clip = resample_frames(clip, config.fixed_length)
    scale = 255.0 / clip.value_range[1]
    return np.clip(np.rint(clip.data * scale), 0, 255).astype(np.uint8)


def to_tensor(clip: ClipTensor) -> torch.Tensor:
    """``T x H x W x C`` numpy clip -> ``T x C x H x W`` float tensor."""
    return torch.from_numpy(np.ascontiguousarray(clip.data.transpose(0, 3, 1, 2)))


@dataclass
class Sample:
    sample_id: str
    rgb: torch.Tensor
    depth: Optional[torch.Tensor]
    label: int


class ClipLoader:
    """Decode and preprocess manifest samples, optionally caching results.

    Caching keeps every prepared clip in memory, which suits the desk-scale
    synthetic corpus; disable it for large corpora.
    """

    def __init__(self, manifest: Manifest, config: DataConfig,
                 modalities: Sequence[str] = (RGB,), cache: bool = True):
        self.manifest = manifest
        self.config = config
        self.modalities = tuple(modalities)
        self.cache = cache
        self._cache: dict[str, Sample] = {}

    def load(self, sample_id: str) -> Sample:
        if sample_id in self._cache:
            return self._cache[sample_id]
        rec = self.manifest[sample_id]
        track = None
        if self.config.crop_size is not None:
            if rec.skeleton_path is None:
                raise ValueError(f"sample {sample_id!r} has no skeleton file for cropping")
            track = load_skeleton(rec.skeleton_path)
        rgb_clip = decode_clip(rec, RGB)
        if track is not None and track.joints.shape[0] != rgb_clip.num_frames:
            track = load_skeleton(rec.skeleton_path, num_frames=rgb_clip.num_frames)
        rgb = to_tensor(prepare_clip(rgb_clip, self.config, track))
        depth = None
        if DEPTH in self.modalities:
            depth = to_tensor(prepare_clip(decode_clip(rec, DEPTH), self.config, track))
        sample = Sample(sample_id, rgb, depth, rec.sign_id)
        if self.cache:
            self._cache[sample_id] = sample
        return sample

    def batches(self, sample_ids: Sequence[str], batch_size: int = 1,
                rng: Optional[np.random.Generator] = None) -> Iterator[tuple]:
        """Yield ``(ids, rgb, depth, labels)`` with a leading batch axis.

        ``ids`` are visited in sorted order, shuffled by ``rng`` when given.
        Batches larger than one require every clip to share its length.
        """
        ids = sorted(sample_ids)
        if rng is not None:
            ids = [ids[i] for i in rng.permutation(len(ids))]
        for start in range(0, len(ids), batch_size):
            chunk = [self.load(i) for i in ids[start:start + batch_size]]
            lengths = {s.rgb.shape[0] for s in chunk}
            if len(lengths) > 1:
                raise ValueError(
                    f"batch of {len(chunk)} clips has mixed lengths {sorted(lengths)}; "
                    "configure fixed_length or use batch_size=1"
                )
            rgb = torch.stack([s.rgb for s in chunk])
            depth = torch.stack([s.depth for s in chunk]) if chunk[0].depth is not None else None
            labels = torch.tensor([s.label for s in chunk], dtype=torch.long)
            yield [s.sample_id for s in chunk], rgb, depth, labels
