"""Derive the three synchronized views of a frame sequence: RGB (identity
transpose), dense optical flow, and a motion segmentation mask.

Flow is a dense two-frame estimator built on quadratic polynomial expansion:
each neighbourhood of a grayscale frame is fit with f(p) ~ p^T A p + b^T p + c
under a Gaussian weight; a translation d between frames then satisfies
A d = -(b1 - b0)/2, which is solved per pixel after window averaging, iterated
coarse-to-fine over an image pyramid.  The mask comes from a per-pixel
temporal-median background model followed by binary open/close cleanup.
"""

import os
import tempfile
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import mvtio

GRAY_WEIGHTS = (0.299, 0.587, 0.114)
SCALE_TAGS = ("short", "medium", "long")
CLIP_FRAMES = 16
VIEW_FILES = {"rgb": "rgb.mvt", "flow": "flow.mvt", "mask": "mask.mvt"}


@dataclass(frozen=True)
class FlowConfig:
    levels: int = 3
    pyr_scale: float = 0.5
    winsize: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1

    def __post_init__(self):
        if not 0.0 < self.pyr_scale < 1.0:
            raise ValueError(f"pyr_scale must be in (0, 1), got {self.pyr_scale}")
        if self.levels < 1 or self.iterations < 1:
            raise ValueError("levels and iterations must be at least 1")
        if self.winsize < 3 or self.poly_n < 2 or self.poly_sigma <= 0:
            raise ValueError("invalid window or polynomial parameters")


@dataclass(frozen=True)
class MaskConfig:
    threshold: float = 0.12
    morph_size: int = 3

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.morph_size < 1 or self.morph_size % 2 == 0:
            raise ValueError("morph_size must be a positive odd integer")


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # [T,H,W,3] in [0,1]
    frame_rate_hz: float = 30.0

    def __post_init__(self):
        f = self.frames
        if f.ndim != 4 or f.shape[-1] != 3:
            raise ValueError(f"frames must be [T,H,W,3], got {f.shape}")
        if f.shape[0] < 2:
            raise ValueError("a frame sequence needs at least 2 frames")
        if f.min() < 0.0 or f.max() > 1.0:
            raise ValueError("frame values must lie in [0, 1]")


@dataclass(frozen=True)
class MultiViewClip:
    rgb: np.ndarray  # [3,T,H,W]
    flow: np.ndarray  # [2,T,H,W], (u,v) pixels/frame
    mask: np.ndarray  # [1,T,H,W] binary
    label: int
    scale_tag: str

    def __post_init__(self):
        thw = self.rgb.shape[1:]
        if self.rgb.shape[0] != 3 or self.flow.shape != (2, *thw) or self.mask.shape != (1, *thw):
            raise ValueError("views must share [T,H,W] with channels 3/2/1")
        if not np.isin(self.mask, (0.0, 1.0)).all():
            raise ValueError("mask must be exactly binary")
        if self.rgb.min() < 0.0 or self.rgb.max() > 1.0:
            raise ValueError("rgb values must lie in [0, 1]")
        if self.scale_tag not in SCALE_TAGS:
            raise ValueError(f"scale_tag must be one of {SCALE_TAGS}")


def to_gray(frames):
    """Luminance of [...,3] rgb in [0,1]."""
    return np.asarray(frames, dtype=np.float64) @ np.asarray(GRAY_WEIGHTS)


def _corr1d(img, kernel, axis):
    """Correlation along one axis with replicated edges; window may exceed the
    axis extent."""
    n = len(kernel) // 2
    idx = np.clip(np.arange(img.shape[axis] + 2 * n) - n, 0, img.shape[axis] - 1)
    padded = np.take(img, idx, axis=axis)
    windows = sliding_window_view(padded, len(kernel), axis=axis)
    return windows @ np.asarray(kernel, dtype=img.dtype)


def _box_blur(img, size):
    kernel = np.full(size, 1.0 / size)
    return _corr1d(_corr1d(img, kernel, -2), kernel, -1)


def _gauss_kernel(sigma):
    radius = max(1, int(np.ceil(3.0 * sigma)))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(k**2) / (2.0 * sigma**2))
    return g / g.sum()


@lru_cache(maxsize=8)
def _poly_inverse_gram(n, sigma):
    """Inverse normal-equation matrix for the weighted quadratic fit over the
    (2n+1)^2 neighbourhood with basis (1, x, y, x^2, y^2, xy)."""
    k = np.arange(-n, n + 1, dtype=np.float64)
    g = np.exp(-(k**2) / (2.0 * sigma**2))
    g /= g.sum()
    xx, yy = np.meshgrid(k, k)
    basis = np.stack([np.ones_like(xx), xx, yy, xx**2, yy**2, xx * yy]).reshape(6, -1)
    w = np.outer(g, g).ravel()
    gram = (basis * w) @ basis.T
    return np.linalg.inv(gram), g, k * g, (k**2) * g


def _poly_expand(img, n, sigma):
    """Per-pixel quadratic fit of a grayscale image.

    Returns (A, b): A is [H,W,2,2] symmetric, b is [H,W,2], both in (x, y)
    component order with x along the width axis.
    """
    ginv, gk, xgk, xxgk = _poly_inverse_gram(n, sigma)
    v0 = _corr1d(img, gk, 0)
    v1 = _corr1d(img, xgk, 0)
    v2 = _corr1d(img, xxgk, 0)
    moments = np.stack(
        [
            _corr1d(v0, gk, 1),
            _corr1d(v0, xgk, 1),
            _corr1d(v1, gk, 1),
            _corr1d(v0, xxgk, 1),
            _corr1d(v2, gk, 1),
            _corr1d(v1, xgk, 1),
        ]
    )
    coef = np.einsum("ij,jhw->ihw", ginv, moments)
    b = np.stack([coef[1], coef[2]], axis=-1)
    half_xy = 0.5 * coef[5]
    a = np.empty((*img.shape, 2, 2))
    a[..., 0, 0] = coef[3]
    a[..., 1, 1] = coef[4]
    a[..., 0, 1] = half_xy
    a[..., 1, 0] = half_xy
    return a, b


def _resize_bilinear(img, out_h, out_w):
    """Half-pixel-centre bilinear resize of leading [H,W] axes; any trailing
    axes ride along."""
    h, w = img.shape[:2]
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.minimum(ys.astype(np.int64), h - 2) if h > 1 else np.zeros(out_h, np.int64)
    x0 = np.minimum(xs.astype(np.int64), w - 2) if w > 1 else np.zeros(out_w, np.int64)
    fy = (ys - y0).reshape(-1, 1)
    fx = (xs - x0).reshape(1, -1)
    extra = (1,) * (img.ndim - 2)
    fy = fy.reshape(out_h, 1, *extra)
    fx = fx.reshape(1, out_w, *extra)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    r0 = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    r1 = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return r0 * (1 - fy) + r1 * fy


def _warp_fields(a, b, disp):
    """Bilinear-sample the polynomial fields at p + disp; returns the sampled
    fields and the validity mask of in-bounds sample points."""
    h, w = b.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    px = xs + disp[..., 0]
    py = ys + disp[..., 1]
    valid = (px >= 0) & (px <= w - 1) & (py >= 0) & (py <= h - 1)
    px = np.clip(px, 0.0, w - 1.0)
    py = np.clip(py, 0.0, h - 1.0)
    x0 = np.minimum(px.astype(np.int64), w - 2) if w > 1 else np.zeros_like(px, np.int64)
    y0 = np.minimum(py.astype(np.int64), h - 2) if h > 1 else np.zeros_like(py, np.int64)
    fx = px - x0
    fy = py - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    def sample(field):
        shape = (h, w) + (1,) * (field.ndim - 2)
        wx = fx.reshape(shape)
        wy = fy.reshape(shape)
        top = field[y0, x0] * (1 - wx) + field[y0, x1] * wx
        bot = field[y1, x0] * (1 - wx) + field[y1, x1] * wx
        return top * (1 - wy) + bot * wy

    return sample(a), sample(b), valid


def _flow_iteration(a0, b0, a1, b1, disp, winsize):
    """One displacement refinement: warp frame-1 fields by the prior, average
    the quadratic terms, window the normal equations, solve 2x2 per pixel."""
    a1w, b1w, valid = _warp_fields(a1, b1, disp)
    vmask = valid[..., None]
    a_avg = np.where(vmask[..., None], 0.5 * (a0 + a1w), a0)
    # out-of-frame samples keep the prior: db collapses to A d there
    db = np.where(vmask, -0.5 * (b1w - b0), 0.0)
    db += np.einsum("hwij,hwj->hwi", a_avg, disp)

    g11 = a_avg[..., 0, 0] ** 2 + a_avg[..., 0, 1] ** 2
    g12 = a_avg[..., 0, 1] * (a_avg[..., 0, 0] + a_avg[..., 1, 1])
    g22 = a_avg[..., 1, 1] ** 2 + a_avg[..., 0, 1] ** 2
    h1 = a_avg[..., 0, 0] * db[..., 0] + a_avg[..., 0, 1] * db[..., 1]
    h2 = a_avg[..., 0, 1] * db[..., 0] + a_avg[..., 1, 1] * db[..., 1]
    g11, g12, g22, h1, h2 = (_box_blur(m, winsize) for m in (g11, g12, g22, h1, h2))

    det = g11 * g22 - g12 * g12
    good = np.abs(det) > 1e-12  # textureless neighbourhoods resolve to zero
    inv_det = np.divide(1.0, det, out=np.zeros_like(det), where=good)
    u = (g22 * h1 - g12 * h2) * inv_det
    v = (g11 * h2 - g12 * h1) * inv_det
    return np.stack([u, v], axis=-1)


def _pyramid_sizes(h, w, cfg: FlowConfig):
    sizes = []
    for level in range(cfg.levels):
        scale = cfg.pyr_scale**level
        lh, lw = max(1, round(h * scale)), max(1, round(w * scale))
        window = 2 * cfg.poly_n + 1
        if min(lh, lw) < window:
            raise ValueError(
                f"frame {h}x{w} is below the smallest pyramid level: level {level} "
                f"is {lh}x{lw} but the polynomial window needs {window}; reduce levels"
            )
        sizes.append((lh, lw))
    return sizes


def _frame_expansions(gray, sizes, cfg: FlowConfig):
    """Polynomial fields of one frame at every pyramid level (fine to coarse)."""
    out = []
    for level, (lh, lw) in enumerate(sizes):
        if level == 0:
            img = gray
        else:
            sigma = (1.0 / cfg.pyr_scale**level - 1.0) * 0.5
            g = _gauss_kernel(sigma)
            img = _resize_bilinear(_corr1d(_corr1d(gray, g, 0), g, 1), lh, lw)
        out.append(_poly_expand(img, cfg.poly_n, cfg.poly_sigma))
    return out


def _pair_flow(exp0, exp1, sizes, cfg: FlowConfig):
    disp = np.zeros((*sizes[-1], 2))
    for level in range(cfg.levels - 1, -1, -1):
        if level < cfg.levels - 1:
            lh, lw = sizes[level]
            ph, pw = sizes[level + 1]
            disp = _resize_bilinear(disp, lh, lw)
            disp = disp * np.array([lw / pw, lh / ph])
        a0, b0 = exp0[level]
        a1, b1 = exp1[level]
        for _ in range(cfg.iterations):
            disp = _flow_iteration(a0, b0, a1, b1, disp, cfg.winsize)
    return disp


def dense_flow(seq: FrameSequence, cfg: FlowConfig = FlowConfig()):
    """Per-frame displacement field [2,T,H,W]; flow[t] maps frame t-1 onto
    frame t, and flow[0] is all zeros."""
    gray = to_gray(seq.frames)
    t, h, w = gray.shape
    sizes = _pyramid_sizes(h, w, cfg)
    flow = np.zeros((2, t, h, w), dtype=np.float32)
    prev = _frame_expansions(gray[0], sizes, cfg)
    for i in range(1, t):
        cur = _frame_expansions(gray[i], sizes, cfg)
        disp = _pair_flow(prev, cur, sizes, cfg)
        flow[0, i] = disp[..., 0]
        flow[1, i] = disp[..., 1]
        prev = cur
    return flow


def _binary_filter(mask, size, op):
    n = size // 2
    padded = np.pad(mask, ((0, 0), (n, n), (n, n)), mode="edge")
    windows = sliding_window_view(padded, (size, size), axis=(1, 2))
    return windows.min(axis=(-2, -1)) if op == "erode" else windows.max(axis=(-2, -1))


def motion_mask(seq: FrameSequence, cfg: MaskConfig = MaskConfig()):
    """Median-background foreground mask [1,T,H,W], cleaned by a binary open
    then close."""
    gray = to_gray(seq.frames)
    if gray.shape[0] < 3:
        raise ValueError("motion_mask needs at least 3 frames for the median background")
    background = np.median(gray, axis=0)
    fg = (np.abs(gray - background) > cfg.threshold).astype(np.float32)
    size = cfg.morph_size
    fg = _binary_filter(_binary_filter(fg, size, "erode"), size, "dilate")
    fg = _binary_filter(_binary_filter(fg, size, "dilate"), size, "erode")
    return fg[None].astype(np.float32)


def extract_rgb(seq: FrameSequence):
    """Channel-first transpose [3,T,H,W]; values untouched."""
    return np.ascontiguousarray(seq.frames.transpose(3, 0, 1, 2)).astype(np.float32, copy=False)


def _atomic_write(path, array):
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fp:
            mvtio.dump_mvt(array, fp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def subsample_indices(n_frames, target=CLIP_FRAMES):
    """Uniform-stride frame picks: stride floor(n/target) starting at 0."""
    if n_frames < target:
        raise ValueError(f"sequence too short: {n_frames} < {target} frames")
    stride = n_frames // target
    return np.arange(target) * stride


def assemble_clip(
    seq: FrameSequence,
    label: int,
    scale_tag: str,
    flow_cfg: FlowConfig = FlowConfig(),
    mask_cfg: MaskConfig = MaskConfig(),
    cache_dir=None,
):
    """All three views of a 16-frame subsample, optionally cached as .mvt
    files (re-reads return the cached tensors verbatim)."""
    if cache_dir is not None:
        paths = {v: os.path.join(cache_dir, name) for v, name in VIEW_FILES.items()}
        if all(os.path.exists(p) for p in paths.values()):
            return MultiViewClip(
                rgb=mvtio.read_mvt(paths["rgb"]),
                flow=mvtio.read_mvt(paths["flow"]),
                mask=mvtio.read_mvt(paths["mask"]),
                label=label,
                scale_tag=scale_tag,
            )
    picks = subsample_indices(seq.frames.shape[0])
    sub = FrameSequence(frames=seq.frames[picks], frame_rate_hz=seq.frame_rate_hz)
    clip = MultiViewClip(
        rgb=extract_rgb(sub),
        flow=dense_flow(sub, flow_cfg),
        mask=motion_mask(sub, mask_cfg),
        label=label,
        scale_tag=scale_tag,
    )
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        for view, name in VIEW_FILES.items():
            _atomic_write(os.path.join(cache_dir, name), getattr(clip, view))
    return clip
