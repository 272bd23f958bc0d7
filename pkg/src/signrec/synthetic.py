"""Desk-scale synthetic gesture corpus.

Each sample shows a stylised signer (head, torso, one arm and hand) in front of a
textured background. The hand traces a closed loop; the class is the pair
(loop shape, number of repetitions), so classes ``2s`` and ``2s + 1`` share a
shape and differ only in how many times it is traced. Signers differ in hand
size and colour, body position and background, which makes signer-independent
splits meaningfully harder than random ones.

Frames are PNG files in per-sample directories: RGB as 8-bit colour, depth as
16-bit millimetres with the hand always nearest to the camera.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .manifest import Manifest, SampleRecord, write_manifest

NUM_BACKGROUNDS = 6
DEPTH_BACKGROUND = 4000
DEPTH_BODY = 2600
DEPTH_ARM = 2200
DEPTH_HAND = 1800

# (centre x, centre y, radius x, radius y, direction) in units of frame size.
BASE_SHAPES = [
    ("circle_ccw", 0.50, 0.55, 0.22, 0.22, 1),
    ("small_centre_cw", 0.50, 0.42, 0.15, 0.15, -1),
    ("wide_ellipse", 0.50, 0.62, 0.28, 0.10, 1),
    ("tall_ellipse", 0.50, 0.50, 0.10, 0.26, 1),
    ("upper_left", 0.34, 0.36, 0.16, 0.16, 1),
    ("upper_right", 0.66, 0.36, 0.16, 0.16, 1),
    ("lower_left", 0.34, 0.70, 0.16, 0.16, -1),
    ("lower_right", 0.66, 0.70, 0.16, 0.16, -1),
]


@dataclass
class SyntheticCorpusConfig:
    num_signs: int = 10
    num_signers: int = 5
    samples_per_signer_per_sign: int = 2
    frame_size: int = 64
    frames_min: int = 12
    frames_max: int = 24
    seed: int = 0

    def __post_init__(self):
        for name in ("num_signs", "num_signers", "samples_per_signer_per_sign",
                     "frame_size", "frames_min", "frames_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.frames_min > self.frames_max:
            raise ValueError("frames_min exceeds frames_max")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def load(cls, path) -> "SyntheticCorpusConfig":
        return cls(**json.loads(Path(path).read_text()))


def shape_for(shape_index: int) -> tuple:
    if shape_index < len(BASE_SHAPES):
        return BASE_SHAPES[shape_index]
    rng = np.random.default_rng([12345, shape_index])
    rx, ry = rng.uniform(0.08, 0.2, size=2)
    cx = rng.uniform(0.25 + rx, 0.75 - rx + 0.2)
    cy = rng.uniform(0.3, 0.7)
    return (f"loop_{shape_index}", float(min(cx, 0.9 - rx)), float(cy), float(rx), float(ry),
            int(rng.choice([-1, 1])))


def sign_spec(sign_id: int) -> tuple[tuple, int]:
    """Loop shape and repetition count of a class."""
    return shape_for(sign_id // 2), 1 + sign_id % 2


def sign_name(sign_id: int) -> str:
    shape, reps = sign_spec(sign_id)
    return f"{shape[0]}_x{reps}"


def trajectory(sign_id: int, num_frames: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Hand centre per frame, ``num_frames x 2`` pixel (x, y).

    The phase advances by exactly ``2 * pi * reps`` from the first frame to
    the last, so the loop is traced ``reps`` full times. Every clip starts
    near the rightmost point of its loop, with a small random phase jitter.
    """
    (_, cx, cy, rx, ry, direction), reps = sign_spec(sign_id)
    scale = rng.uniform(0.85, 1.15)
    cx += rng.uniform(-0.03, 0.03)
    cy += rng.uniform(-0.03, 0.03)
    phase0 = rng.uniform(-0.3, 0.3)
    if num_frames == 1:
        phi = np.array([phase0])
    else:
        phi = phase0 + 2 * np.pi * reps * np.arange(num_frames) / (num_frames - 1)
    x = (cx + scale * rx * np.cos(phi)) * size
    y = (cy + direction * scale * ry * np.sin(phi)) * size
    return np.stack([x, y], axis=1)


def _background(bg: int, size: int) -> np.ndarray:
    rng = np.random.default_rng([777, bg])
    base = rng.integers(40, 200, size=3)
    yy, xx = np.mgrid[0:size, 0:size]
    period = int(rng.integers(6, 16))
    stripes = ((xx + (bg % 2) * yy) // period) % 2
    img = base[None, None, :] + 12 * stripes[..., None]
    return np.clip(img, 0, 255).astype(np.uint8)


def _signer_style(signer: int, seed: int) -> dict:
    rng = np.random.default_rng([seed, 99, signer])
    return {
        "hand_color": rng.integers(150, 256, size=3),
        "body_color": rng.integers(0, 120, size=3),
        "arm_color": rng.integers(100, 200, size=3),
        "hand_radius": rng.uniform(0.09, 0.11),
        "arm_width": rng.uniform(0.08, 0.1),
        "body_dx": rng.uniform(-0.06, 0.06),
    }


def _segment_mask(xx, yy, a: np.ndarray, b: np.ndarray, half_width: float) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab) or 1.0
    u = np.clip(((xx - a[0]) * ab[0] + (yy - a[1]) * ab[1]) / denom, 0.0, 1.0)
    return (xx - a[0] - u * ab[0]) ** 2 + (yy - a[1] - u * ab[1]) ** 2 <= half_width ** 2


def render_sample(sign_id: int, num_frames: int, size: int, signer_style: dict,
                  background: int, rng: np.random.Generator):
    """Render one clip; returns (rgb T x S x S x 3 uint8, depth T x S x S uint16, joints T x 3 x 2)."""
    hand = trajectory(sign_id, num_frames, size, rng)
    yy, xx = np.mgrid[0:size, 0:size]
    bg = _background(background, size)
    body_cx = (0.5 + signer_style["body_dx"]) * size
    head = (body_cx, 0.18 * size)
    shoulder = (body_cx, 0.34 * size)
    head_mask = (xx - head[0]) ** 2 + (yy - head[1]) ** 2 <= (0.1 * size) ** 2
    torso_mask = (np.abs(xx - body_cx) <= 0.18 * size) & (yy >= shoulder[1])
    radius = signer_style["hand_radius"] * size
    arm_half = signer_style["arm_width"] * size / 2
    arm_root = np.array([body_cx + 0.15 * size, 0.38 * size])

    rgb = np.empty((num_frames, size, size, 3), dtype=np.uint8)
    depth = np.empty((num_frames, size, size), dtype=np.uint16)
    joints = np.empty((num_frames, 3, 2))
    for t in range(num_frames):
        frame = bg.copy()
        frame[torso_mask | head_mask] = signer_style["body_color"]
        d = np.full((size, size), DEPTH_BACKGROUND, dtype=np.int64)
        d += (yy * 4)  # floor slopes away from the camera
        d[torso_mask | head_mask] = DEPTH_BODY
        hx, hy = hand[t]
        arm_mask = _segment_mask(xx, yy, arm_root, np.array([hx, hy]), arm_half)
        frame[arm_mask] = signer_style["arm_color"]
        d[arm_mask] = DEPTH_ARM
        hand_mask = (xx - hx) ** 2 + (yy - hy) ** 2 <= radius ** 2
        frame[hand_mask] = signer_style["hand_color"]
        d[hand_mask] = DEPTH_HAND
        noise = rng.integers(-6, 7, size=frame.shape)
        rgb[t] = np.clip(frame.astype(np.int64) + noise, 0, 255).astype(np.uint8)
        depth[t] = d.astype(np.uint16)
        joints[t] = [(hx, hy), head, shoulder]
    return rgb, depth, joints


def _write_png(arr: np.ndarray, path: Path) -> None:
    try:
        Image.fromarray(arr).save(path, format="PNG", optimize=False)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def generate_synthetic_corpus(config: SyntheticCorpusConfig, out_dir) -> Manifest:
    """Write the corpus under ``out_dir`` and return its manifest.

    Output layout: ``clips/<sample_id>/{rgb,depth}/%06d.png``,
    ``clips/<sample_id>/skeleton.csv`` and ``manifest.csv`` (+ sign names).
    Joint 0 is the hand, 1 the head, 2 the shoulder centre.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc}") from exc

    size = config.frame_size
    records = []
    for signer in range(config.num_signers):
        style = _signer_style(signer, config.seed)
        for sign in range(config.num_signs):
            for rep in range(config.samples_per_signer_per_sign):
                rng = np.random.default_rng([config.seed, signer, sign, rep])
                n = int(rng.integers(config.frames_min, config.frames_max + 1))
                background = int((signer * 2 + rep) % NUM_BACKGROUNDS)
                rgb, depth, joints = render_sample(sign, n, size, style, background, rng)

                sample_id = f"p{signer:02d}_s{sign:03d}_r{rep:02d}"
                clip_dir = out_dir / "clips" / sample_id
                for sub in ("rgb", "depth"):
                    try:
                        (clip_dir / sub).mkdir(parents=True, exist_ok=True)
                    except OSError as exc:
                        raise OSError(f"cannot create {clip_dir / sub}: {exc}") from exc
                for t in range(n):
                    _write_png(rgb[t], clip_dir / "rgb" / f"{t:06d}.png")
                    _write_png(depth[t], clip_dir / "depth" / f"{t:06d}.png")
                skel = clip_dir / "skeleton.csv"
                lines = ["frame,joint,x,y"]
                lines += [f"{t},{j},{joints[t, j, 0]:.3f},{joints[t, j, 1]:.3f}"
                          for t in range(n) for j in range(joints.shape[1])]
                try:
                    skel.write_text("\n".join(lines) + "\n")
                except OSError as exc:
                    raise OSError(f"cannot write {skel}: {exc}") from exc

                records.append(SampleRecord(
                    sample_id=sample_id,
                    signer_id=f"signer{signer:02d}",
                    sign_id=sign,
                    background_id=f"bg{background}",
                    rgb_path=str(clip_dir / "rgb"),
                    depth_path=str(clip_dir / "depth"),
                    skeleton_path=str(skel),
                    num_frames=n,
                ))

    manifest = Manifest(records=records, num_signs=config.num_signs,
                        sign_names=[sign_name(k) for k in range(config.num_signs)])
    write_manifest(manifest, out_dir / "manifest.csv")
    return manifest
