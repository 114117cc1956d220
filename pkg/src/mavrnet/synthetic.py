"""Synthetic MAV clip renderer: four piecewise-linear motion classes at three
apparent scales over controllable backgrounds, with exact ground-truth
silhouettes and a stratified train/test dataset builder."""

import json
import os
from dataclasses import asdict, dataclass, replace

import numpy as np
from PIL import Image

from . import mvtio
from .views import (
    CLIP_FRAMES,
    FlowConfig,
    FrameSequence,
    MaskConfig,
    SCALE_TAGS,
    assemble_clip,
)

CLASSES = ("vShape", "inv_vShape", "left_right", "up_down")
BACKGROUNDS = ("flat", "textured_noise", "clutter")
# apparent radius in px at 64x64, scaled proportionally at other frame sizes
SCALE_RADIUS_64 = {"short": 8.0, "medium": 6.0, "long": 4.0}
OBJECT_INTENSITY = 0.9
FLAT_LEVEL = 0.2
PATH_MARGIN = 4.0
FRAME_FILE = "frame_%05d.png"
TRUTH_FILE = "truth_mask.mvt"
META_FILE = "meta.json"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str
    amplitude_px: float
    speed_px_per_frame: float
    start: tuple  # (x, y) px
    duration_frames: int

    def __post_init__(self):
        if self.kind not in CLASSES:
            raise ValueError(f"kind must be one of {CLASSES}, got {self.kind!r}")
        if self.amplitude_px <= 0:
            raise ValueError("amplitude_px must be positive")
        if self.duration_frames < 2:
            raise ValueError("duration_frames must be at least 2")


@dataclass(frozen=True)
class RenderConfig:
    frame_size: tuple = (64, 64)  # (H, W)
    object_radius_px: float = 8.0
    background: str = "flat"
    illumination_jitter: float = 0.0
    pixel_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        h, w = self.frame_size
        if h < 32 or w < 32:
            raise ValueError(f"frame_size must be at least 32x32, got {h}x{w}")
        if self.object_radius_px < 2:
            raise ValueError("object_radius_px must be at least 2")
        if self.background not in BACKGROUNDS:
            raise ValueError(f"background must be one of {BACKGROUNDS}")
        if not 0.0 <= self.illumination_jitter <= 0.2:
            raise ValueError("illumination_jitter must be in [0, 0.2]")
        if self.pixel_noise_sigma < 0:
            raise ValueError("pixel_noise_sigma must be non-negative")


def trajectory_point(spec: TrajectorySpec, t):
    """Path position (x, y) at frame t.

    left_right / up_down are triangle waves peaking at amplitude when
    t = duration/2; the V kinds drift in x at speed_px_per_frame while y
    traces a V (or its mirror) that closes at the final frame.
    """
    d = spec.duration_frames
    if not 0 <= t < d:
        raise ValueError(f"frame index {t} outside [0, {d})")
    a = spec.amplitude_px
    x0, y0 = spec.start
    if spec.kind == "left_right":
        return (x0 + 2.0 * a * min(t, d - t) / d, y0)
    if spec.kind == "up_down":
        return (x0, y0 + 2.0 * a * min(t, d - t) / d)
    dip = a * (1.0 - abs(1.0 - 2.0 * t / (d - 1)))
    x = x0 + spec.speed_px_per_frame * t
    return (x, y0 + dip) if spec.kind == "vShape" else (x, y0 - dip)


def cross_extent(radius):
    """Half-width of the rendered cross including the anti-aliasing rim."""
    return 1.5 * radius + 0.5


def _cross_coverage(h, w, cx, cy, radius):
    """Anti-aliased coverage in [0,1] of five tangent disks of radius/2: one
    centred plus four offset by +-radius along each axis."""
    r = radius / 2.0
    ys = np.arange(h, dtype=np.float64).reshape(-1, 1)
    xs = np.arange(w, dtype=np.float64).reshape(1, -1)
    cov = np.zeros((h, w))
    for dx, dy in ((0, 0), (radius, 0), (-radius, 0), (0, radius), (0, -radius)):
        dist = np.hypot(xs - (cx + dx), ys - (cy + dy))
        np.maximum(cov, np.clip(r + 0.5 - dist, 0.0, 1.0), out=cov)
    return cov


def analytic_cross_area(radius):
    """Exact union area of the five tangent disks (disjoint interiors)."""
    return 5.0 * np.pi * (radius / 2.0) ** 2


def _render_background(cfg: RenderConfig, rng):
    h, w = cfg.frame_size
    if cfg.background == "flat":
        return np.full((h, w), FLAT_LEVEL)
    if cfg.background == "textured_noise":
        return rng.uniform(0.05, 0.5, (h, w))
    bg = np.full((h, w), FLAT_LEVEL)
    for _ in range(int(rng.integers(6, 13))):
        inten = rng.uniform(0.3, 0.85)
        if rng.uniform() < 0.5:
            y, x = rng.integers(0, h), rng.integers(0, w)
            bh, bw = rng.integers(3, h // 3 + 1), rng.integers(3, w // 3 + 1)
            bg[y : y + bh, x : x + bw] = inten
        else:
            cy, cx = rng.uniform(0, h), rng.uniform(0, w)
            rad = rng.uniform(2, min(h, w) / 6)
            ys = np.arange(h).reshape(-1, 1)
            xs = np.arange(w).reshape(1, -1)
            bg[np.hypot(xs - cx, ys - cy) <= rad] = inten
    return bg


def render_clip(spec: TrajectorySpec, cfg: RenderConfig):
    """(FrameSequence, silhouettes [1,T,H,W]): the cross at trajectory_point(t)
    over the configured background, plus exact coverage>=0.5 silhouettes."""
    h, w = cfg.frame_size
    rng = np.random.default_rng(cfg.seed)
    background = _render_background(cfg, rng)
    ext = cross_extent(cfg.object_radius_px)
    t_total = spec.duration_frames
    frames = np.empty((t_total, h, w, 3))
    truth = np.empty((1, t_total, h, w), dtype=np.float32)
    for t in range(t_total):
        cx, cy = trajectory_point(spec, t)
        if not (
            ext <= cx <= w - 1 - ext
            and ext <= cy <= h - 1 - ext
            and PATH_MARGIN <= cx <= w - 1 - PATH_MARGIN
            and PATH_MARGIN <= cy <= h - 1 - PATH_MARGIN
        ):
            raise ValueError(
                f"trajectory escapes frame: centre ({cx:.1f}, {cy:.1f}) at frame {t} "
                f"needs {ext:.1f}px clearance in a {w}x{h} frame"
            )
        cov = _cross_coverage(h, w, cx, cy, cfg.object_radius_px)
        truth[0, t] = cov >= 0.5
        img = background * (1.0 - cov) + OBJECT_INTENSITY * cov
        if cfg.illumination_jitter > 0:
            img = img * (1.0 + cfg.illumination_jitter * rng.uniform(-1.0, 1.0))
        img = np.repeat(img[..., None], 3, axis=-1)
        if cfg.pixel_noise_sigma > 0:
            img = img + rng.normal(0.0, cfg.pixel_noise_sigma, img.shape)
        frames[t] = np.clip(img, 0.0, 1.0)
    return FrameSequence(frames=frames), truth


def default_flow_config(frame_size, base: FlowConfig = FlowConfig()):
    """Base flow settings with the pyramid depth capped so the coarsest level
    still fits the polynomial window."""
    window = 2 * base.poly_n + 1
    levels = 1
    extent = min(frame_size)
    while levels < base.levels and round(extent * base.pyr_scale**levels) >= window:
        levels += 1
    return replace(base, levels=levels)


def _random_spec(kind, rng, cfg: RenderConfig, duration):
    h, w = cfg.frame_size
    clear = max(cross_extent(cfg.object_radius_px), PATH_MARGIN) + 1.0
    lo_x, hi_x = clear, w - 1 - clear
    lo_y, hi_y = clear, h - 1 - clear
    span_x, span_y = hi_x - lo_x, hi_y - lo_y
    if kind == "left_right":
        amp = rng.uniform(0.45, 0.95) * span_x
        x0 = rng.uniform(lo_x, hi_x - amp)
        y0 = rng.uniform(lo_y, hi_y)
        speed = 2.0 * amp / duration
    elif kind == "up_down":
        amp = rng.uniform(0.45, 0.95) * span_y
        x0 = rng.uniform(lo_x, hi_x)
        y0 = rng.uniform(lo_y, hi_y - amp)
        speed = 2.0 * amp / duration
    else:
        amp = rng.uniform(0.4, 0.8) * span_y
        drift = rng.uniform(0.5, 0.9) * span_x
        speed = drift / (duration - 1)
        x0 = rng.uniform(lo_x, hi_x - drift)
        y0 = rng.uniform(lo_y, hi_y - amp) if kind == "vShape" else rng.uniform(lo_y + amp, hi_y)
    return TrajectorySpec(
        kind=kind,
        amplitude_px=float(amp),
        speed_px_per_frame=float(speed),
        start=(float(x0), float(y0)),
        duration_frames=duration,
    )


def _write_frames(frames, clip_dir):
    u8 = np.round(frames * 255.0).astype(np.uint8)
    for t in range(u8.shape[0]):
        Image.fromarray(u8[t], "RGB").save(os.path.join(clip_dir, FRAME_FILE % t))
    return u8


def load_frames(clip_dir):
    """FrameSequence from the numbered PNGs of one clip directory."""
    names = sorted(n for n in os.listdir(clip_dir) if n.startswith("frame_") and n.endswith(".png"))
    if not names:
        raise FileNotFoundError(f"no frame PNGs in {clip_dir}")
    stack = np.stack([np.asarray(Image.open(os.path.join(clip_dir, n))) for n in names])
    return FrameSequence(frames=stack.astype(np.float64) / 255.0)


def build_dataset(
    root,
    n_per_class_per_scale,
    render_cfg: RenderConfig = RenderConfig(),
    seed=0,
    flow_cfg: FlowConfig = None,
    mask_cfg: MaskConfig = MaskConfig(),
    duration=CLIP_FRAMES,
):
    """Render n clips per (class, scale) cell, extract all views, and write
    the train/test directory tree plus a deterministic manifest.

    The 2:1 split is stratified per cell: the first round(2n/3) clip indices
    train, the rest test.
    """
    n = int(n_per_class_per_scale)
    if n < 3:
        raise ValueError("need at least 3 clips per class and scale for a 2:1 split")
    if flow_cfg is None:
        flow_cfg = default_flow_config(render_cfg.frame_size)
    h, w = render_cfg.frame_size
    radius_scale = min(h, w) / 64.0
    n_train = round(2 * n / 3)
    entries = []
    for ci, cls in enumerate(CLASSES):
        for si, scale in enumerate(SCALE_TAGS):
            radius = SCALE_RADIUS_64[scale] * radius_scale
            for i in range(n):
                state = np.random.SeedSequence((seed, ci, si, i)).generate_state(2)
                render_seed = int(state[0])
                spec_rng = np.random.default_rng(int(state[1]))
                cfg = replace(render_cfg, object_radius_px=radius, seed=render_seed)
                spec = _random_spec(cls, spec_rng, cfg, duration)
                split = "train" if i < n_train else "test"
                clip_id = f"{scale}_{i:03d}"
                clip_dir = os.path.join(root, split, cls, clip_id)
                os.makedirs(clip_dir, exist_ok=True)
                try:
                    seq, truth = render_clip(spec, cfg)
                    _write_frames(seq.frames, clip_dir)
                    quantized = FrameSequence(frames=np.round(seq.frames * 255.0) / 255.0)
                    assemble_clip(
                        quantized, ci, scale, flow_cfg, mask_cfg, cache_dir=clip_dir
                    )
                    mvtio.write_mvt(os.path.join(clip_dir, TRUTH_FILE), truth)
                    meta = {
                        "class": cls,
                        "label": ci,
                        "scale_tag": scale,
                        "seed": render_seed,
                        "spec": asdict(spec),
                    }
                    with open(os.path.join(clip_dir, META_FILE), "w") as fp:
                        json.dump(meta, fp, indent=1, sort_keys=True)
                except (OSError, ValueError) as err:
                    raise RuntimeError(f"failed to build clip {clip_dir}: {err}") from err
                entries.append(
                    {
                        "path": "/".join((split, cls, clip_id)),
                        "split": split,
                        "class": cls,
                        "label": ci,
                        "scale_tag": scale,
                        "seed": render_seed,
                    }
                )
    manifest = {
        "classes": list(CLASSES),
        "frame_size": [h, w],
        "n_per_class_per_scale": n,
        "seed": seed,
        "render": {k: v for k, v in asdict(render_cfg).items() if k != "seed"},
        "flow": asdict(flow_cfg),
        "mask": asdict(mask_cfg),
        "clips": entries,
    }
    with open(os.path.join(root, MANIFEST_FILE), "w") as fp:
        json.dump(manifest, fp, indent=1, sort_keys=True)
    return manifest
