"""Training objectives: classification cross-entropy, the temperature-scaled
multi-view alignment loss, the attention-entropy regularizer, and their
weighted total."""

from dataclasses import dataclass

import numpy as np

from . import ops
from .tensor import Tensor, as_tensor


@dataclass
class LossWeights:
    lambda1: float = 0.5
    lambda2: float = 0.1
    tau: float = 0.07

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")


def _stable_log_softmax_terms(logits):
    """Returns (shifted logits, row log-sum-exp); the row max is detached, so
    the gradient is the usual softmax(x) - onehot."""
    shift = Tensor(logits.data.max(axis=-1, keepdims=True))
    z = ops.subtract(logits, shift)
    lse = ops.log(ops.tensor_sum(ops.exp(z), axis=-1))
    return z, lse


def classification_loss(logits, labels):
    """Mean over the batch of -log softmax(logits)[label]."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = logits.shape[-1]
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= n_classes:
        raise ValueError(f"label out of range [0, {n_classes})")
    onehot = np.zeros(logits.shape, dtype=logits.data.dtype)
    onehot[np.arange(labels.size), labels] = 1.0
    z, lse = _stable_log_softmax_terms(logits)
    true_logit = ops.tensor_sum(ops.multiply(z, Tensor(onehot)), axis=-1)
    return ops.mean(ops.subtract(lse, true_logit))


def _diagonal_cross_entropy(scores):
    """Row-wise CE of a [B,B] similarity matrix against diagonal targets."""
    b = scores.shape[0]
    eye = np.eye(b, dtype=scores.data.dtype)
    z, lse = _stable_log_softmax_terms(scores)
    true_logit = ops.tensor_sum(ops.multiply(z, Tensor(eye)), axis=-1)
    return ops.mean(ops.subtract(lse, true_logit))


def alignment_loss(f_rgb, f_flow, f_mask, weights: LossWeights = LossWeights()):
    """Mean InfoNCE-style CE over the ordered view pairs (rgb,flow),
    (rgb,mask), (flow,mask); rows of f_a @ f_b^T / tau score against the
    same-sample diagonal."""
    views = {"rgb": as_tensor(f_rgb), "flow": as_tensor(f_flow), "mask": as_tensor(f_mask)}
    for name, emb in views.items():
        if not np.isfinite(emb.data).all():
            raise FloatingPointError(f"alignment embeddings for {name} are not finite")
        norms = np.linalg.norm(emb.data, axis=-1)
        if np.abs(norms - 1.0).max() > 1e-4:
            raise ValueError(f"alignment embeddings for {name} are not unit-norm (contract violation)")
    inv_tau = 1.0 / weights.tau
    pairs = (("rgb", "flow"), ("rgb", "mask"), ("flow", "mask"))
    total = None
    for a, b in pairs:
        scores = ops.matmul(views[a], ops.transpose(views[b], (1, 0))) * inv_tau
        term = _diagonal_cross_entropy(scores)
        total = term if total is None else ops.add(total, term)
    return total * (1.0 / len(pairs))


def attention_entropy_loss(trace):
    """(1/N) sum_ij a_ij log a_ij with N = T, averaged over batch and heads.

    Uniform rows give -ln T (maximal entropy); one-hot rows give 0 under the
    eps-clamped log convention. Always in [-ln T, 0].
    """
    trace = as_tensor(trace)
    t = trace.shape[-1]
    plogp = ops.multiply(trace, ops.log(trace))
    per_map = ops.tensor_sum(plogp, axis=(-2, -1)) * (1.0 / t)
    return ops.mean(per_map)


def total_loss(cls_term, align_term, att_term, weights: LossWeights = LossWeights()):
    """cls + lambda1 * align + lambda2 * att; aborts on a NaN component."""
    parts = {"classification": cls_term, "alignment": align_term, "attention_entropy": att_term}
    for name, part in parts.items():
        value = part.data if isinstance(part, Tensor) else np.asarray(part)
        if np.isnan(value).any():
            raise FloatingPointError(f"{name} loss is NaN")
    out = as_tensor(cls_term)
    if weights.lambda1 != 0.0:
        out = ops.add(out, as_tensor(align_term) * weights.lambda1)
    if weights.lambda2 != 0.0:
        out = ops.add(out, as_tensor(att_term) * weights.lambda2)
    return out
