"""Cross-view multi-head self-attention over the fused per-frame sequence,
and the two-layer classification head."""

import math
from dataclasses import dataclass

from . import ops
from .layers import Linear, Module


@dataclass
class AttentionConfig:
    model_dim: int
    heads: int = 12

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ValueError(f"model_dim {self.model_dim} not divisible by {self.heads} heads")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads


class CrossViewAttention(Module):
    """context = softmax(Q K^T / sqrt(head_dim)) V per head, heads concatenated
    through an output projection. Also returns the softmax weights [B,h,T,T]
    still attached to the graph, for the entropy regularizer."""

    def __init__(self, rng, cfg: AttentionConfig):
        d = cfg.model_dim
        self.w_query = Linear(rng, d, d)
        self.w_key = Linear(rng, d, d)
        self.w_value = Linear(rng, d, d)
        self.w_out = Linear(rng, d, d)
        self.cfg = cfg

    def __call__(self, fused):
        b, t, d = fused.shape
        if d != self.cfg.model_dim:
            raise ValueError(f"fused width {d} != configured model_dim {self.cfg.model_dim}")
        h, hd = self.cfg.heads, self.cfg.head_dim

        def split_heads(x):
            return ops.transpose(ops.reshape(x, (b, t, h, hd)), (0, 2, 1, 3))  # [B,h,T,hd]

        q = split_heads(self.w_query(fused))
        k = split_heads(self.w_key(fused))
        v = split_heads(self.w_value(fused))

        scores = ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(hd))
        weights = ops.softmax(scores, axis=-1)  # [B,h,T,T]
        context = ops.matmul(weights, v)  # [B,h,T,hd]
        merged = ops.reshape(ops.transpose(context, (0, 2, 1, 3)), (b, t, d))
        return self.w_out(merged), weights


class Classifier(Module):
    """Temporal mean, then linear D -> D/2 -> relu -> linear D/2 -> classes."""

    def __init__(self, rng, model_dim: int, n_classes: int = 4):
        self.fc1 = Linear(rng, model_dim, model_dim // 2)
        self.fc2 = Linear(rng, model_dim // 2, n_classes)

    def __call__(self, context):
        pooled = ops.mean(context, axis=-2)  # [B, D]
        return self.fc2(ops.relu(self.fc1(pooled)))
