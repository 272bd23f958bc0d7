"""Spatial saliency (Grad-CAM) and temporal attention visualisation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .model.network import SignRecognizer


@dataclass
class SaliencyClip:
    maps: np.ndarray       # T x H x W in [0, 1], frame resolution
    low_res: np.ndarray    # T x h x w in [0, 1], feature-layer resolution
    source_layer: str
    target_class: int


@dataclass
class AttentionTimeline:
    weights: np.ndarray   # T
    attended: np.ndarray  # T booleans

    def to_json(self) -> dict:
        return {"weights": self.weights.tolist(), "attended": self.attended.tolist()}


def _unbatched(clip: Optional[torch.Tensor]) -> Optional[torch.Tensor]:
    if clip is None:
        return None
    if clip.dim() == 5:
        if clip.shape[0] != 1:
            raise ValueError("visualisation works on one clip at a time")
        clip = clip[0]
    return clip


def gradcam_map(model: SignRecognizer, rgb: torch.Tensor, depth: Optional[torch.Tensor] = None,
                target_class: Union[int, str] = "predicted",
                layer: str = "rgb_backbone") -> SaliencyClip:
    """Grad-CAM over every frame of one clip.

    For each frame the channel weights are the rectified spatial means of the
    target logit's gradient; the map is the channel mean of weight times
    activation, rectified and divided by its maximum over the whole clip.
    """
    layers = model.feature_layers()
    if layer not in layers:
        raise ValueError(f"unknown layer {layer!r}; valid layers: {sorted(layers)}")
    rgb, depth = _unbatched(rgb), _unbatched(depth)

    captured = {}

    def hook(module, inputs, output):
        leaf = output.detach().requires_grad_(True)
        captured["act"] = leaf
        return leaf

    model.eval()
    handle = layers[layer].register_forward_hook(hook)
    try:
        with torch.enable_grad():
            logits, _ = model(rgb, depth)
            if target_class == "predicted":
                target = int(torch.argmax(logits))
            elif isinstance(target_class, (int, np.integer)):
                target = int(target_class)
            else:
                raise ValueError(f"target_class must be an index or 'predicted', got {target_class!r}")
            if not 0 <= target < logits.shape[-1]:
                raise ValueError(f"target class {target} out of range")
            act = captured["act"]
            (grad,) = torch.autograd.grad(logits[target], act)
    finally:
        handle.remove()

    with torch.no_grad():
        weights = torch.relu(grad.mean(dim=(-2, -1)))               # T x C
        cam = torch.relu((weights[..., None, None] * act).mean(dim=-3))  # T x h x w
        peak = cam.max()
        if peak > 0:
            cam = cam / peak
        side = rgb.shape[-2:]
        full = F.interpolate(cam[:, None].double(), size=tuple(side), mode="bilinear",
                             align_corners=False)[:, 0].clamp(0, 1)
    return SaliencyClip(full.numpy(), cam.double().numpy(), layer, target)


def attended_mask(weights: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Frames weighted at least uniformly (``w >= 1/T - tol``)."""
    return weights >= 1.0 / len(weights) - tol


@torch.no_grad()
def attention_timeline(model: SignRecognizer, rgb: torch.Tensor,
                       depth: Optional[torch.Tensor] = None) -> AttentionTimeline:
    if model.attention is None:
        raise ValueError(f"variant {model.config.variant!r} has no temporal attention")
    model.eval()
    _, attn = model(_unbatched(rgb), _unbatched(depth))
    weights = attn.weights.numpy().copy()
    return AttentionTimeline(weights, attended_mask(weights))


def _jet(values: np.ndarray) -> np.ndarray:
    from matplotlib import colormaps
    return colormaps["jet"](values)[..., :3]


def blend(frame: np.ndarray, saliency: np.ndarray, alpha: float = 0.5) -> np.ndarray:
    """Alpha-blend a heatmap over an RGB uint8 frame, weighted by saliency.

    Zero saliency leaves the frame untouched.
    """
    s = saliency[..., None]
    out = frame.astype(np.float64) * (1 - alpha * s) + 255.0 * _jet(saliency) * alpha * s
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _resize_map(m: np.ndarray, height: int, width: int) -> np.ndarray:
    if m.shape == (height, width):
        return m
    t = torch.from_numpy(np.ascontiguousarray(m, dtype=np.float64))[None, None]
    return F.interpolate(t, size=(height, width), mode="bilinear",
                         align_corners=False)[0, 0].clamp(0, 1).numpy()


def plot_timeline(timeline: AttentionTimeline, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = np.arange(len(timeline.weights))
    fig, ax = plt.subplots(figsize=(6, 2.5), dpi=100)
    colors = ["tab:red" if a else "tab:blue" for a in timeline.attended]
    ax.bar(t, timeline.weights, color=colors)
    ax.axhline(1.0 / len(t), color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel("frame")
    ax.set_ylabel("attention weight")
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def render_overlay(frames: np.ndarray, saliency: Optional[SaliencyClip],
                   timeline: Optional[AttentionTimeline], out_dir,
                   alpha: float = 0.5, mark_attended: bool = False) -> list[Path]:
    """Write ``frame_%04d.png`` overlays plus ``timeline.png``/``timeline.json``.

    ``frames`` is the raw ``T x H x W x 3`` uint8 clip. With
    ``mark_attended`` set, attended frames get a red border.
    """
    frames = np.asarray(frames)
    if frames.dtype != np.uint8:
        frames = np.clip(np.rint(frames), 0, 255).astype(np.uint8)
    n, h, w = frames.shape[:3]
    if saliency is not None and saliency.maps.shape[0] != n:
        raise ValueError(f"saliency has {saliency.maps.shape[0]} frames, clip has {n}")
    if timeline is not None and len(timeline.weights) != n:
        raise ValueError(f"timeline has {len(timeline.weights)} frames, clip has {n}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc}") from exc

    written = []
    for t in range(n):
        img = frames[t]
        if saliency is not None:
            img = blend(img, _resize_map(saliency.maps[t], h, w), alpha)
        if mark_attended and timeline is not None and timeline.attended[t]:
            img = img.copy()
            b = max(1, min(h, w) // 32)
            img[:b], img[-b:], img[:, :b], img[:, -b:] = (255, 0, 0), (255, 0, 0), (255, 0, 0), (255, 0, 0)
        path = out_dir / f"frame_{t:04d}.png"
        try:
            Image.fromarray(img).save(path, format="PNG")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    if timeline is not None:
        plot_path = out_dir / "timeline.png"
        try:
            plot_timeline(timeline, plot_path)
            (out_dir / "timeline.json").write_text(json.dumps(timeline.to_json()))
        except OSError as exc:
            raise OSError(f"cannot write timeline files in {out_dir}: {exc}") from exc
        written.append(plot_path)
    return written
