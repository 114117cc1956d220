"""Per-view 3D residual encoder tapping multi-stage features C2-C5.

Stem: conv k(3,7,7) stride (1,2,2) pad (1,3,3) -> norm -> relu -> max-pool
(1,2,2). Four stages of two basic blocks (conv-norm-relu-conv-norm plus skip,
1x1x1 projection where channels or stride change), spatial strides
1,2,2,2. The temporal axis is never strided, so every stage keeps T.
"""

from dataclasses import dataclass

from . import ops
from .layers import Conv3d, GroupNorm, Module


@dataclass
class EncoderConfig:
    in_channels: int
    width: int = 16
    norm_groups: int = 8

    def __post_init__(self):
        if self.width < 4 or self.width % self.norm_groups:
            raise ValueError(f"width {self.width} must be >= 4 and divisible by {self.norm_groups} norm groups")


@dataclass
class StageFeatures:
    c2: object
    c3: object
    c4: object
    c5: object

    def __iter__(self):
        return iter((self.c2, self.c3, self.c4, self.c5))


class BasicBlock(Module):
    def __init__(self, rng, in_channels, out_channels, spatial_stride, groups):
        stride = (1, spatial_stride, spatial_stride)
        self.conv1 = Conv3d(rng, in_channels, out_channels, (3, 3, 3), stride, (1, 1, 1))
        self.norm1 = GroupNorm(out_channels, groups)
        self.conv2 = Conv3d(rng, out_channels, out_channels, (3, 3, 3), (1, 1, 1), (1, 1, 1))
        self.norm2 = GroupNorm(out_channels, groups)
        if in_channels != out_channels or spatial_stride != 1:
            self.proj = Conv3d(rng, in_channels, out_channels, (1, 1, 1), stride, (0, 0, 0), bias=False)
        else:
            self.proj = None

    def __call__(self, x):
        h = ops.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        shortcut = self.proj(x) if self.proj is not None else x
        return ops.relu(ops.add(h, shortcut))


class Encoder(Module):
    def __init__(self, rng, cfg: EncoderConfig):
        w, g = cfg.width, cfg.norm_groups
        self.stem_conv = Conv3d(rng, cfg.in_channels, w, (3, 7, 7), (1, 2, 2), (1, 3, 3))
        self.stem_norm = GroupNorm(w, g)
        widths = (w, 2 * w, 4 * w, 8 * w)
        strides = (1, 2, 2, 2)
        stages = []
        prev = w
        for width, stride in zip(widths, strides):
            stages.append([BasicBlock(rng, prev, width, stride, g), BasicBlock(rng, width, width, 1, g)])
            prev = width
        self.stages = [blk for pair in stages for blk in pair]
        self.cfg = cfg

    def __call__(self, x) -> StageFeatures:
        h, w = x.shape[-2], x.shape[-1]
        if h % 32 or w % 32:
            raise ValueError(f"encoder input spatial extents must be divisible by 32, got {h}x{w}")
        if x.shape[-4] != self.cfg.in_channels:
            raise ValueError(f"encoder expects {self.cfg.in_channels} input channels, got {x.shape[-4]}")
        squeeze = x.ndim == 4
        if squeeze:
            x = ops.reshape(x, (1, *x.shape))
        out = ops.relu(self.stem_norm(self.stem_conv(x)))
        out = ops.pool3d(out, "max", (1, 2, 2), (1, 2, 2))
        taps = []
        for i in range(0, 8, 2):
            out = self.stages[i + 1](self.stages[i](out))
            taps.append(out)
        if squeeze:
            taps = [ops.reshape(t, t.shape[1:]) for t in taps]
        return StageFeatures(*taps)
