"""Training and evaluation harness: SGD with momentum, paired-crop/flip
augmentation, JSON-lines epoch logging, and a binary checkpoint format."""

import json
import os
import struct

import numpy as np

from . import mvtio, ops
from .config import RunConfig
from .dataset import MavrDataset
from .losses import (
    LossWeights,
    alignment_loss,
    attention_entropy_loss,
    classification_loss,
    total_loss,
)
from .metrics import compute_metrics
from .model import MavrNet
from .tensor import Tensor, no_grad

CKPT_MAGIC = b"MAVRCKPT"
CKPT_VERSION = 1
CKPT_NAME = "checkpoint.mavr"
LOG_NAME = "train_log.jsonl"
LOG_KEYS = ("epoch", "train_loss", "train_acc", "test_loss", "test_acc", "l_cls", "l_align", "l_att")


def augment_clip(views: dict, crop: int, rng=None, flip_prob: float = 0.0) -> dict:
    """One crop position and one optional horizontal flip, applied identically
    to every view; flipping negates the flow u channel so the motion field
    still points at the mirrored pixels.

    rng=None means evaluation mode: centered crop, never flipped.
    """
    h, w = next(iter(views.values())).shape[-2:]
    if crop > h or crop > w:
        raise ValueError(f"crop {crop} exceeds frame extent {h}x{w}")
    if rng is None:
        y0, x0 = (h - crop) // 2, (w - crop) // 2
        flip = False
    else:
        y0 = int(rng.integers(0, h - crop + 1))
        x0 = int(rng.integers(0, w - crop + 1))
        flip = bool(rng.uniform() < flip_prob)
    out = {}
    for name, view in views.items():
        v = view[..., y0 : y0 + crop, x0 : x0 + crop]
        if flip:
            v = v[..., ::-1].copy()
            if name == "flow":
                v[0] = -v[0]
        out[name] = v
    return out


class SgdMomentum:
    """p <- p - lr * v with v <- momentum * v + (g + weight_decay * p)."""

    def __init__(self, named_params, lr, momentum=0.9, weight_decay=0.0):
        self.params = dict(named_params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self):
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            v = self.velocity[name]
            v *= self.momentum
            v += g
            p.data -= self.lr * v

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


class CheckpointError(ValueError):
    """Malformed checkpoint file."""


def save_checkpoint(path, header: dict, arrays: dict) -> None:
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fp:
        fp.write(CKPT_MAGIC)
        fp.write(struct.pack("<II", CKPT_VERSION, len(blob)))
        fp.write(blob)
        fp.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            payload = mvtio.mvt_bytes(arrays[name])
            encoded = name.encode()
            fp.write(struct.pack("<H", len(encoded)))
            fp.write(encoded)
            fp.write(struct.pack("<Q", len(payload)))
            fp.write(payload)


def load_checkpoint(path):
    with open(path, "rb") as fp:
        magic = fp.read(8)
        if magic != CKPT_MAGIC:
            raise CheckpointError(f"{path}: bad checkpoint magic {magic!r}")
        version, header_len = struct.unpack("<II", fp.read(8))
        if version != CKPT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fp.read(header_len).decode())
        (count,) = struct.unpack("<I", fp.read(4))
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fp.read(2))
            name = fp.read(name_len).decode()
            (blob_len,) = struct.unpack("<Q", fp.read(8))
            arrays[name] = mvtio.mvt_from_bytes(fp.read(blob_len))
    return header, arrays


def build_model_from_checkpoint(header, arrays):
    cfg = RunConfig.from_dict(header["config"])
    model = MavrNet(np.random.default_rng(0), cfg.model.to_model_config())
    params = dict(model.named_parameters())
    stored = {k: v for k, v in arrays.items() if not k.startswith("velocity/")}
    if set(params) != set(stored):
        missing = sorted(set(params) ^ set(stored))
        raise CheckpointError(f"checkpoint parameters do not match the model: {missing[:4]}")
    for name, p in params.items():
        if p.data.shape != stored[name].shape:
            raise CheckpointError(f"shape mismatch for {name}")
        p.data = stored[name].astype(p.data.dtype)
    return model, cfg


def _loss_weights(cfg: RunConfig) -> LossWeights:
    t = cfg.train
    m = cfg.model
    lambda1 = t.lambda1 if (m.use_alignment and len(m.views) == 3) else 0.0
    lambda2 = t.lambda2 if m.use_attention else 0.0
    return LossWeights(lambda1=lambda1, lambda2=lambda2, tau=t.tau)


def _batch_tensors(dataset, records, crop, rng=None, flip_prob=0.0):
    views = [augment_clip(dataset.views(r), crop, rng, flip_prob) for r in records]
    stacked = {}
    for name in views[0]:
        data = np.stack([v[name] for v in views]).astype(np.float32)
        if not np.isfinite(data).all():
            raise FloatingPointError(f"non-finite values in {name} batch")
        stacked[name] = Tensor(data)
    labels = np.array([r.label for r in records], dtype=np.int64)
    return stacked, labels


def _centered_embeddings(emb):
    """Remove the batch-shared direction before the alignment term.

    Rectified, normalized activations pool to descriptors sharing one large
    sample-independent component, so raw embeddings start the run nearly
    parallel and the contrastive term sits on its uniform-softmax plateau
    with vanishing gradient. Centering across the batch and re-normalizing
    restores the spread the loss needs; the loss itself is unchanged.
    """
    return {
        view: ops.l2_normalize(e - ops.mean(e, axis=0, keepdims=True), axis=-1, zero_fallback=True)
        for view, e in emb.items()
    }


def _forward_losses(model, batch, labels, weights: LossWeights):
    out = model(batch)
    cls = classification_loss(out.logits, labels)
    if weights.lambda1 > 0:
        emb = _centered_embeddings(out.view_embeddings)
        align = alignment_loss(emb["rgb"], emb["flow"], emb["mask"], weights)
    else:
        align = Tensor(np.float32(0.0))
    if weights.lambda2 > 0 and out.attention_trace is not None:
        att = attention_entropy_loss(out.attention_trace)
    else:
        att = Tensor(np.float32(0.0))
    total = total_loss(cls, align, att, weights)
    preds = np.argmax(out.logits.data, axis=-1)
    return total, (float(cls.data), float(align.data), float(att.data)), preds


def _evaluate_split(model, dataset, records, cfg: RunConfig, weights):
    preds, truths = [], []
    loss_sum = 0.0
    bs = cfg.train.batch_size
    with no_grad():
        for i in range(0, len(records), bs):
            chunk = records[i : i + bs]
            batch, labels = _batch_tensors(dataset, chunk, cfg.train.crop)
            total, _, p = _forward_losses(model, batch, labels, weights)
            loss_sum += float(total.data) * len(chunk)
            preds.extend(p.tolist())
            truths.extend(labels.tolist())
    return np.array(truths), np.array(preds), loss_sum / max(len(records), 1)


def train(data_root, cfg: RunConfig, out_dir, dataset=None, progress=None):
    """Full training run; returns a summary dict with the checkpoint path,
    log path, and best test accuracy."""
    t = cfg.train
    os.makedirs(out_dir, exist_ok=True)
    cfg.write(os.path.join(out_dir, "config.json"))
    if dataset is None:
        dataset = MavrDataset(data_root)
    train_recs = dataset.records("train")
    test_recs = dataset.records("test")
    if not train_recs or not test_recs:
        raise ValueError(f"dataset under {data_root} is missing a train or test split")

    init_rng = np.random.default_rng(np.random.SeedSequence((t.seed, 0)))
    data_rng = np.random.default_rng(np.random.SeedSequence((t.seed, 1)))
    model = MavrNet(init_rng, cfg.model.to_model_config())
    opt = SgdMomentum(model.named_parameters(), t.lr, t.momentum, t.weight_decay)
    weights = _loss_weights(cfg)

    log_path = os.path.join(out_dir, LOG_NAME)
    ckpt_path = os.path.join(out_dir, CKPT_NAME)
    best_acc = -1.0
    best_epoch = -1

    def snapshot(epoch, test_acc):
        header = {
            "config": cfg.to_dict(),
            "epoch": epoch,
            "test_acc": round(test_acc, 6),
            "classes": list(dataset.classes),
            "rng_state": data_rng.bit_generator.state,
        }
        arrays = {name: p.data for name, p in opt.params.items()}
        arrays.update({f"velocity/{name}": v for name, v in opt.velocity.items()})
        save_checkpoint(ckpt_path, header, arrays)

    with open(log_path, "w") as log_fp:
        for epoch in range(t.epochs):
            order = data_rng.permutation(len(train_recs))
            loss_sum = 0.0
            comp_sums = np.zeros(3)
            correct = 0
            for bi in range(0, len(order), t.batch_size):
                chunk = [train_recs[j] for j in order[bi : bi + t.batch_size]]
                try:
                    batch, labels = _batch_tensors(dataset, chunk, t.crop, data_rng, t.flip_prob)
                    total, comps, preds = _forward_losses(model, batch, labels, weights)
                except FloatingPointError as err:
                    raise RuntimeError(
                        f"aborting: {err} (epoch {epoch}, batch {bi // t.batch_size})"
                    ) from err
                total.backward()
                opt.step()
                opt.zero_grad()
                loss_sum += float(total.data) * len(chunk)
                comp_sums += np.array(comps) * len(chunk)
                correct += int((preds == labels).sum())

            n_train = len(train_recs)
            truths, preds, test_loss = _evaluate_split(model, dataset, test_recs, cfg, weights)
            test_acc = float((truths == preds).mean())
            row = dict(
                zip(
                    LOG_KEYS,
                    (
                        epoch,
                        round(loss_sum / n_train, 6),
                        round(correct / n_train, 6),
                        round(test_loss, 6),
                        round(test_acc, 6),
                        round(comp_sums[0] / n_train, 6),
                        round(comp_sums[1] / n_train, 6),
                        round(comp_sums[2] / n_train, 6),
                    ),
                )
            )
            log_fp.write(json.dumps(row) + "\n")
            log_fp.flush()
            if progress is not None:
                progress(row)
            if t.checkpoint_policy == "best" and test_acc > best_acc:
                best_acc, best_epoch = test_acc, epoch
                snapshot(epoch, test_acc)
        if t.checkpoint_policy == "final":
            best_acc, best_epoch = test_acc, t.epochs - 1
            snapshot(t.epochs - 1, test_acc)

    return {
        "checkpoint": ckpt_path,
        "log": log_path,
        "best_test_acc": best_acc,
        "best_epoch": best_epoch,
    }


def evaluate_checkpoint(ckpt_path, data_root, split="test", dataset=None):
    """MetricsReport of a saved model on one dataset split."""
    header, arrays = load_checkpoint(ckpt_path)
    model, cfg = build_model_from_checkpoint(header, arrays)
    if dataset is None:
        dataset = MavrDataset(data_root, preload=False)
    if list(dataset.classes) != list(header["classes"]):
        raise ValueError(
            f"class mismatch: checkpoint has {header['classes']}, dataset has {list(dataset.classes)}"
        )
    records = dataset.records(split)
    truths, preds, _ = _evaluate_split(model, dataset, records, cfg, _loss_weights(cfg))
    return compute_metrics(truths, preds, dataset.n_classes, class_names=dataset.classes)
