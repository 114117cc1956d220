"""Feature pyramid over the encoder stages, plus the per-frame view descriptor.

Each stage is reduced to a common width d by a 1x1x1 lateral conv; the
top-down path upsamples the coarser merged map by 2 (nearest) and adds the
lateral; a 3x3x3 conv refines each merged map into P2-P5. Each level is then
globally averaged over space per frame and the four d-vectors concatenated
into the [T, 4d] view descriptor.
"""

from dataclasses import dataclass

from . import ops
from .encoder import StageFeatures
from .layers import Conv3d, Module


@dataclass
class FeaturePyramid:
    p2: object
    p3: object
    p4: object
    p5: object
    view_descriptor: object  # [B, T, 4d]

    @property
    def levels(self):
        return (self.p2, self.p3, self.p4, self.p5)


class FeaturePyramidNet(Module):
    def __init__(self, rng, stage_channels, d: int = 64):
        c2, c3, c4, c5 = stage_channels
        self.lateral2 = Conv3d(rng, c2, d, (1, 1, 1))
        self.lateral3 = Conv3d(rng, c3, d, (1, 1, 1))
        self.lateral4 = Conv3d(rng, c4, d, (1, 1, 1))
        self.lateral5 = Conv3d(rng, c5, d, (1, 1, 1))
        self.refine2 = Conv3d(rng, d, d, (3, 3, 3), padding=(1, 1, 1))
        self.refine3 = Conv3d(rng, d, d, (3, 3, 3), padding=(1, 1, 1))
        self.refine4 = Conv3d(rng, d, d, (3, 3, 3), padding=(1, 1, 1))
        self.refine5 = Conv3d(rng, d, d, (3, 3, 3), padding=(1, 1, 1))
        self.d = d

    def __call__(self, stages: StageFeatures) -> FeaturePyramid:
        c2, c3, c4, c5 = stages
        for fine, coarse, name in ((c2, c3, "C3"), (c3, c4, "C4"), (c4, c5, "C5")):
            if fine.shape[-1] != 2 * coarse.shape[-1] or fine.shape[-2] != 2 * coarse.shape[-2]:
                raise ValueError(f"stage {name} spatial extents are not half of the finer stage")

        m5 = self.lateral5(c5)
        m4 = ops.add(self.lateral4(c4), ops.upsample_nearest2d(m5, 2))
        m3 = ops.add(self.lateral3(c3), ops.upsample_nearest2d(m4, 2))
        m2 = ops.add(self.lateral2(c2), ops.upsample_nearest2d(m3, 2))
        p2, p3, p4, p5 = self.refine2(m2), self.refine3(m3), self.refine4(m4), self.refine5(m5)

        blocks = [pooled_frame_descriptor(p) for p in (p2, p3, p4, p5)]
        descriptor = ops.concat(blocks, axis=-1)
        return FeaturePyramid(p2, p3, p4, p5, descriptor)


def pooled_frame_descriptor(level):
    """[.., C, T, H, W] -> [.., T, C] per-frame global spatial average."""
    pooled = ops.mean(level, axis=(-2, -1))  # [.., C, T]
    axes = tuple(range(pooled.ndim - 2)) + (pooled.ndim - 1, pooled.ndim - 2)
    return ops.transpose(pooled, axes)


def fuse_views(rgb, flow, mask):
    """Concatenate per-frame descriptors in the fixed order rgb, flow, mask.

    Accepts FeaturePyramid objects or raw [.., T, k] descriptor tensors; views
    absent from an ablation subset may be passed as None.
    """
    views = []
    for v in (rgb, flow, mask):
        if v is None:
            continue
        views.append(v.view_descriptor if isinstance(v, FeaturePyramid) else v)
    if not views:
        raise ValueError("fuse_views needs at least one view descriptor")
    t0, width0 = views[0].shape[-2], views[0].shape[-1]
    for v in views[1:]:
        if v.shape[-2] != t0:
            raise ValueError(f"view descriptor frame counts disagree: {v.shape[-2]} vs {t0}")
        if v.shape[-1] != width0:
            raise ValueError(f"view descriptor widths disagree: {v.shape[-1]} vs {width0}")
    return ops.concat(views, axis=-1)
