"""Full multi-view network: per-view encoders, pyramid fusion, cross-view
attention, classifier. Ablation switches disable the pyramid (plain pooled C5
concat), the attention block, or restrict the view subset."""

from dataclasses import dataclass, field

from . import ops
from .attention import AttentionConfig, Classifier, CrossViewAttention
from .encoder import Encoder, EncoderConfig
from .layers import Module
from .pyramid import FeaturePyramidNet, fuse_views, pooled_frame_descriptor

VIEW_ORDER = ("rgb", "flow", "mask")
VIEW_CHANNELS = {"rgb": 3, "flow": 2, "mask": 1}
N_CLASSES = 4


@dataclass
class ModelConfig:
    views: tuple = VIEW_ORDER
    width: int = 16
    pyramid_dim: int = 64
    heads: int = 12
    norm_groups: int = 8
    use_mvfpn: bool = True
    use_attention: bool = True

    def __post_init__(self):
        views = tuple(v for v in VIEW_ORDER if v in self.views)
        unknown = set(self.views) - set(VIEW_ORDER)
        if unknown:
            raise ValueError(f"unknown views {sorted(unknown)}; choose from {VIEW_ORDER}")
        if not views:
            raise ValueError("at least one view must be enabled")
        self.views = views

    @property
    def descriptor_width(self) -> int:
        return 4 * self.pyramid_dim if self.use_mvfpn else 8 * self.width

    @property
    def fused_width(self) -> int:
        return len(self.views) * self.descriptor_width

    def resolved_heads(self) -> int:
        """Largest head count <= requested that divides the fused width."""
        h = min(self.heads, self.fused_width)
        while self.fused_width % h:
            h -= 1
        return h


@dataclass
class ModelOutput:
    logits: object  # [B, 4]
    attention_trace: object  # [B, h, T, T] or None
    view_embeddings: dict = field(default_factory=dict)  # view -> [B, width] unit rows


class MavrNet(Module):
    def __init__(self, rng, cfg: ModelConfig):
        self.cfg = cfg
        w = cfg.width
        stage_channels = (w, 2 * w, 4 * w, 8 * w)
        self.encoders = {}
        self.pyramids = {}
        for view in cfg.views:
            enc = Encoder(rng, EncoderConfig(VIEW_CHANNELS[view], w, cfg.norm_groups))
            setattr(self, f"encoder_{view}", enc)
            self.encoders[view] = enc
        if cfg.use_mvfpn:
            for view in cfg.views:
                pyr = FeaturePyramidNet(rng, stage_channels, cfg.pyramid_dim)
                setattr(self, f"pyramid_{view}", pyr)
                self.pyramids[view] = pyr
        if cfg.use_attention:
            self.attention = CrossViewAttention(rng, AttentionConfig(cfg.fused_width, cfg.resolved_heads()))
        else:
            self.attention = None
        self.classifier = Classifier(rng, cfg.fused_width, N_CLASSES)

    def __call__(self, batch: dict) -> ModelOutput:
        """batch maps view name -> Tensor [B, C_view, T, H, W]."""
        descriptors = {}
        for view in self.cfg.views:
            if view not in batch:
                raise ValueError(f"batch is missing enabled view {view!r}")
            stages = self.encoders[view](batch[view])
            if self.cfg.use_mvfpn:
                descriptors[view] = self.pyramids[view](stages).view_descriptor
            else:
                descriptors[view] = pooled_frame_descriptor(stages.c5)

        fused = fuse_views(
            descriptors.get("rgb"), descriptors.get("flow"), descriptors.get("mask")
        )
        if self.attention is not None:
            context, trace = self.attention(fused)
        else:
            context, trace = fused, None
        logits = self.classifier(context)

        embeddings = {
            view: ops.l2_normalize(ops.mean(desc, axis=-2), axis=-1, zero_fallback=True)
            for view, desc in descriptors.items()
        }
        return ModelOutput(logits, trace, embeddings)
