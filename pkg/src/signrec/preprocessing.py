"""Clip decoding and spatial/temporal transforms.

Clips are numpy arrays laid out ``T x H x W x C``. Every transform is pure and
returns a new :class:`ClipTensor`.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

RGB = "rgb"
DEPTH = "depth"

FRAME_RE = re.compile(r"^(\d{6})\.(png|jpg|jpeg|bmp)$", re.IGNORECASE)
VIDEO_SUFFIXES = {".mp4", ".avi", ".mov", ".mkv", ".webm"}

# ImageNet statistics the VGG16 weights were trained with.
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ClipError(ValueError):
    """Raised when a clip cannot be decoded or transformed."""


@dataclass(frozen=True)
class ClipTensor:
    data: np.ndarray
    modality: str
    value_range: tuple[float, float]

    def __post_init__(self):
        if self.data.ndim != 4:
            raise ClipError(f"clip data must be T x H x W x C, got shape {self.data.shape}")
        if self.data.shape[0] < 1:
            raise ClipError("clip has no frames")
        if self.data.shape[-1] not in (1, 3):
            raise ClipError(f"clip must have 1 or 3 channels, got {self.data.shape[-1]}")
        if self.modality not in (RGB, DEPTH):
            raise ClipError(f"unknown modality {self.modality!r}")

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    def _replace(self, data, value_range=None) -> "ClipTensor":
        return ClipTensor(data, self.modality,
                          self.value_range if value_range is None else value_range)


@dataclass(frozen=True)
class SkeletonTrack:
    joints: np.ndarray  # T x J x 2, pixel (x, y)

    def __post_init__(self):
        if self.joints.ndim != 3 or self.joints.shape[2] != 2 or self.joints.shape[1] < 1:
            raise ClipError(f"skeleton must be T x J x 2, got {self.joints.shape}")
        if not np.all(np.isfinite(self.joints)):
            raise ClipError("skeleton contains non-finite coordinates")


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def _frame_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise ClipError(f"frame directory not found: {directory}")
    found = {}
    for p in directory.iterdir():
        m = FRAME_RE.match(p.name)
        if m:
            found[int(m.group(1))] = p
    if not found:
        raise ClipError(f"no frame images in {directory}")
    for i in range(len(found)):
        if i not in found:
            raise ClipError(f"{directory}: frame {i} is missing")
    return [found[i] for i in range(len(found))]


def _cv2():
    try:
        import cv2
    except ImportError as exc:
        raise ClipError("reading video files needs OpenCV (pip install opencv-python-headless)") from exc
    return cv2


def count_frames(path) -> int:
    path = Path(path)
    if path.suffix.lower() in VIDEO_SUFFIXES:
        cv2 = _cv2()
        cap = cv2.VideoCapture(str(path))
        n = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
        cap.release()
        return n
    return len(_frame_files(path))


def _decode_image(path: Path, index: int, modality: str) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if modality == RGB:
                arr = np.asarray(im.convert("RGB"))
            else:
                if im.mode in ("RGB", "RGBA", "P"):
                    im = im.convert("L")
                arr = np.asarray(im)
                if arr.ndim == 3:
                    arr = arr[..., 0]
                arr = arr[..., None]
    except (OSError, SyntaxError) as exc:
        raise ClipError(f"frame {index} ({path}) could not be decoded: {exc}") from exc
    return arr


def _decode_video(path: Path, modality: str) -> np.ndarray:
    cv2 = _cv2()
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise ClipError(f"cannot open video {path}")
    frames = []
    while True:
        ok, frame = cap.read()
        if not ok:
            break
        if modality == RGB:
            frames.append(cv2.cvtColor(frame, cv2.COLOR_BGR2RGB))
        else:
            frames.append(cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)[..., None])
    cap.release()
    if not frames:
        raise ClipError(f"video {path}: frame 0 could not be decoded")
    return np.stack(frames)


def decode_clip(record, modality: str) -> ClipTensor:
    """Load the RGB or depth frames referenced by a :class:`SampleRecord`.

    Depth is returned single-channel with its native integer range declared.
    """
    if modality == RGB:
        path = record.rgb_path
    elif modality == DEPTH:
        path = record.depth_path
        if path is None:
            raise ClipError(f"sample {record.sample_id!r} has no depth path")
    else:
        raise ClipError(f"unknown modality {modality!r}")
    path = Path(path)

    if path.suffix.lower() in VIDEO_SUFFIXES:
        raw = _decode_video(path, modality)
    else:
        frames = [_decode_image(p, i, modality) for i, p in enumerate(_frame_files(path))]
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            bad = next(i for i, f in enumerate(frames) if f.shape != frames[0].shape)
            raise ClipError(f"{path}: frame {bad} has shape {frames[bad].shape}, "
                            f"expected {frames[0].shape}")
        raw = np.stack(frames)

    hi = float(np.iinfo(raw.dtype).max) if np.issubdtype(raw.dtype, np.integer) else 1.0
    if raw.dtype == np.int32:  # PIL widens 16-bit PNG to int32
        hi = 65535.0
    return ClipTensor(raw.astype(np.float32), modality, (0.0, hi))


def load_skeleton(path, num_frames: Optional[int] = None) -> SkeletonTrack:
    """Read a ``frame,joint,x,y`` CSV into a T x J x 2 track."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh), start=1):
            try:
                rows.append((int(row["frame"]), int(row["joint"]),
                             float(row["x"]), float(row["y"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ClipError(f"{path}: row {i} malformed: {exc}") from exc
    if not rows:
        raise ClipError(f"{path}: skeleton file is empty")
    t = max(r[0] for r in rows) + 1 if num_frames is None else num_frames
    j = max(r[1] for r in rows) + 1
    joints = np.zeros((t, j, 2), dtype=np.float64)
    for f, k, x, y in rows:
        if f < t:
            joints[f, k] = (x, y)
    return SkeletonTrack(joints)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def resize_frames(clip: ClipTensor, side: int) -> ClipTensor:
    """Bilinearly resize every frame to ``side x side``."""
    if side < 8:
        raise ClipError(f"side must be at least 8, got {side}")
    if clip.height == side and clip.width == side:
        return clip._replace(clip.data.copy())
    x = torch.from_numpy(np.ascontiguousarray(clip.data)).permute(0, 3, 1, 2)
    y = F.interpolate(x, size=(side, side), mode="bilinear", align_corners=False)
    out = y.permute(0, 2, 3, 1).contiguous().numpy()
    lo, hi = clip.value_range
    return clip._replace(np.clip(out, lo, hi))


def scale_depth(clip: ClipTensor) -> ClipTensor:
    """Min-max scale a depth clip into [0, 1] using the clip's own extremes."""
    lo, hi = float(clip.data.min()), float(clip.data.max())
    if hi > lo:
        data = (clip.data - lo) / (hi - lo)
    else:
        data = np.zeros_like(clip.data)
    return clip._replace(data.astype(np.float32), (0.0, 1.0))


def replicate_depth_channels(clip: ClipTensor) -> ClipTensor:
    if clip.channels != 1:
        raise ClipError(f"depth replication needs a single-channel clip, got C={clip.channels}")
    return clip._replace(np.repeat(clip.data, 3, axis=3))


def crop_about_joint(clip: ClipTensor, track: SkeletonTrack, joint_index: int,
                     crop_size: int) -> ClipTensor:
    """Square crop centred horizontally on a joint and aligned to the frame top.

    The window is clamped so it never leaves the frame. Frames where the joint
    was not tracked (0, 0) reuse the nearest tracked position.
    """
    if not 0 <= joint_index < track.joints.shape[1]:
        raise ClipError(f"joint_index {joint_index} out of range for J={track.joints.shape[1]}")
    if crop_size > min(clip.height, clip.width) or crop_size < 1:
        raise ClipError(f"crop_size {crop_size} does not fit {clip.height}x{clip.width} frames")
    if track.joints.shape[0] != clip.num_frames:
        raise ClipError(f"skeleton has {track.joints.shape[0]} frames, clip has {clip.num_frames}")
    xs = track.joints[:, joint_index, 0].astype(np.float64)
    tracked = np.any(track.joints[:, joint_index] != 0, axis=1)
    if not tracked.any():
        raise ClipError(f"joint {joint_index} is never tracked (all-zero coordinates)")
    idx = np.flatnonzero(tracked)
    nearest = idx[np.abs(np.arange(len(xs))[:, None] - idx[None, :]).argmin(axis=1)]
    xs = xs[nearest]

    out = np.empty((clip.num_frames, crop_size, crop_size, clip.channels), dtype=clip.data.dtype)
    for t, cx in enumerate(xs):
        left = crop_window_left(cx, crop_size, clip.width)
        out[t] = clip.data[t, :crop_size, left:left + crop_size]
    return clip._replace(out)


def crop_window_left(center_x: float, crop_size: int, width: int) -> int:
    left = int(np.floor(center_x - crop_size / 2 + 0.5))
    return min(max(left, 0), width - crop_size)


def resample_indices(num_frames: int, target_t: int) -> np.ndarray:
    """Indices ``round(j * (T - 1) / (target_t - 1))``, rounding halves up."""
    if target_t == 1:
        return np.zeros(1, dtype=np.int64)
    j = np.arange(target_t, dtype=np.int64)
    return (2 * j * (num_frames - 1) + (target_t - 1)) // (2 * (target_t - 1))


def resample_frames(clip: ClipTensor, target_t: int) -> ClipTensor:
    if target_t < 1:
        raise ClipError(f"target_t must be positive, got {target_t}")
    return clip._replace(clip.data[resample_indices(clip.num_frames, target_t)])


def normalize(clip: ClipTensor, mean: Sequence[float], std: Sequence[float]) -> ClipTensor:
    """``(x / range_max - mean) / std`` per channel."""
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    std = np.asarray(std, dtype=np.float64).reshape(-1)
    if mean.size != clip.channels or std.size != clip.channels:
        raise ClipError(f"mean/std need {clip.channels} entries")
    if np.any(std <= 0):
        raise ClipError("std components must be positive")
    lo, hi = clip.value_range
    data = ((clip.data.astype(np.float64) / hi - mean) / std).astype(np.float32)
    new_lo = float(np.min((lo / hi - mean) / std))
    new_hi = float(np.max((1.0 - mean) / std))
    return clip._replace(data, (new_lo, new_hi))
