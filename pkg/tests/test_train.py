"""Training harness: augmentation, optimizer, checkpoints, and the full loop
on a miniature corpus."""

import filecmp
import json
import math
import os

import numpy as np
import pytest

from mavrnet.config import RunConfig
from mavrnet.dataset import MavrDataset
from mavrnet.losses import LossWeights, alignment_loss
from mavrnet.synthetic import CLASSES, RenderConfig, build_dataset
from mavrnet.tensor import Tensor
from mavrnet.train import (
    LOG_KEYS,
    CheckpointError,
    SgdMomentum,
    _centered_embeddings,
    augment_clip,
    evaluate_checkpoint,
    load_checkpoint,
    save_checkpoint,
    train,
)


def _views(h=8, w=8, t=4, rng=None):
    rng = rng or np.random.default_rng(0)
    return {
        "rgb": rng.uniform(size=(3, t, h, w)).astype(np.float32),
        "flow": rng.normal(size=(2, t, h, w)).astype(np.float32),
        "mask": (rng.uniform(size=(1, t, h, w)) > 0.5).astype(np.float32),
    }


class TestAugmentClip:
    def test_eval_mode_takes_centered_crop(self):
        views = _views(10, 14)
        out = augment_clip(views, 8)
        for name in views:
            np.testing.assert_array_equal(out[name], views[name][..., 1:9, 3:11])

    def test_eval_mode_full_size_is_identity(self):
        views = _views(8, 8)
        out = augment_clip(views, 8)
        for name in views:
            np.testing.assert_array_equal(out[name], views[name])

    def test_same_crop_and_flip_for_every_view(self):
        views = _views(12, 12)
        out = augment_clip(views, 8, rng=np.random.default_rng(3), flip_prob=1.0)
        # Recover the crop offsets from the rgb view, then check the other
        # views were cut at the same place and mirrored the same way.
        found = False
        for y0 in range(5):
            for x0 in range(5):
                ref = views["rgb"][..., y0 : y0 + 8, x0 : x0 + 8][..., ::-1]
                if np.array_equal(out["rgb"], ref):
                    found = True
                    np.testing.assert_array_equal(
                        out["mask"], views["mask"][..., y0 : y0 + 8, x0 : x0 + 8][..., ::-1]
                    )
        assert found

    def test_flip_negates_only_flow_u(self):
        flow = np.zeros((2, 2, 4, 4), dtype=np.float32)
        flow[0] = 1.0
        flow[1] = 2.0
        out = augment_clip({"flow": flow}, 4, rng=np.random.default_rng(0), flip_prob=1.0)
        np.testing.assert_array_equal(out["flow"][0], -np.ones((2, 4, 4)))
        np.testing.assert_array_equal(out["flow"][1], 2 * np.ones((2, 4, 4)))

    def test_never_flips_at_zero_probability(self):
        views = _views(8, 8)
        for seed in range(20):
            out = augment_clip(views, 8, rng=np.random.default_rng(seed), flip_prob=0.0)
            np.testing.assert_array_equal(out["flow"], views["flow"])

    def test_oversize_crop_rejected(self):
        with pytest.raises(ValueError, match="crop"):
            augment_clip(_views(8, 8), 9)


class TestSgdMomentum:
    def test_two_steps_match_hand_computation(self):
        # v1 = 1, p1 = 1 - 0.1; v2 = 0.9 + 1 = 1.9, p2 = 0.9 - 0.19 = 0.71
        p = Tensor(np.array([1.0]), requires_grad=True)
        opt = SgdMomentum({"p": p}, lr=0.1, momentum=0.9, weight_decay=0.0)
        for _ in range(2):
            p.grad = np.array([1.0])
            opt.step()
        assert p.data[0] == pytest.approx(0.71, abs=1e-12)

    def test_weight_decay_adds_scaled_parameter_to_gradient(self):
        p = Tensor(np.array([2.0]), requires_grad=True)
        opt = SgdMomentum({"p": p}, lr=0.1, momentum=0.9, weight_decay=0.1)
        p.grad = np.array([0.0])
        opt.step()
        assert p.data[0] == pytest.approx(2.0 - 0.1 * 0.2, abs=1e-12)

    def test_missing_gradient_is_skipped(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        opt = SgdMomentum({"p": p}, lr=0.1)
        opt.step()
        assert p.data[0] == 1.0
        assert opt.velocity["p"][0] == 0.0

    def test_zero_grad_clears_gradients(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        p.grad = np.array([5.0])
        opt = SgdMomentum({"p": p}, lr=0.1)
        opt.zero_grad()
        assert p.grad is None


class TestCenteredEmbeddings:
    def _sample(self, dominance):
        rng = np.random.default_rng(0)
        shared = np.zeros(16)
        shared[0] = 1.0
        spread = np.linalg.qr(rng.standard_normal((16, 16)))[0][:6]
        raw = shared * dominance + spread
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        return Tensor(raw)

    def test_rows_are_unit_norm_and_batch_mean_free(self):
        emb = {"rgb": self._sample(10.0), "flow": self._sample(8.0), "mask": self._sample(12.0)}
        out = _centered_embeddings(emb)
        for e in out.values():
            np.testing.assert_allclose(np.linalg.norm(e.data, axis=1), 1.0, atol=1e-6)

    def test_shared_direction_no_longer_hides_the_signal(self):
        # All rows nearly parallel to one direction: the raw contrastive term
        # sits near its uniform plateau ln(B); after centering, the identical
        # per-sample components make it near-minimal.
        e = self._sample(10.0)
        raw = alignment_loss(e, e, e, LossWeights())
        cen = _centered_embeddings({"rgb": e, "flow": e, "mask": e})
        centered = alignment_loss(cen["rgb"], cen["flow"], cen["mask"], LossWeights())
        assert float(raw.data) > 1.0
        assert float(centered.data) < 1e-3


class TestCheckpointFile:
    def _sample(self):
        header = {"config": RunConfig().to_dict(), "epoch": 3, "classes": list(CLASSES)}
        arrays = {
            "w": np.arange(12, dtype=np.float32).reshape(3, 4),
            "velocity/w": np.ones((3, 4), dtype=np.float32),
        }
        return header, arrays

    def test_round_trip_preserves_header_and_arrays(self, tmp_path):
        header, arrays = self._sample()
        path = tmp_path / "ck.mavr"
        save_checkpoint(path, header, arrays)
        got_header, got_arrays = load_checkpoint(path)
        assert got_header == header
        assert sorted(got_arrays) == sorted(arrays)
        for name in arrays:
            np.testing.assert_array_equal(got_arrays[name], arrays[name])
            assert got_arrays[name].dtype == arrays[name].dtype

    def test_resave_is_byte_identical(self, tmp_path):
        header, arrays = self._sample()
        a, b = tmp_path / "a.mavr", tmp_path / "b.mavr"
        save_checkpoint(a, header, arrays)
        save_checkpoint(b, *load_checkpoint(a))
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic_names_the_file(self, tmp_path):
        path = tmp_path / "junk.mavr"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 32)
        with pytest.raises(CheckpointError, match="junk.mavr"):
            load_checkpoint(path)

    def test_unsupported_version_rejected(self, tmp_path):
        header, arrays = self._sample()
        path = tmp_path / "ck.mavr"
        save_checkpoint(path, header, arrays)
        raw = bytearray(path.read_bytes())
        raw[8] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)


def _tiny_cfg(epochs=2, seed=0):
    cfg = RunConfig()
    cfg.train.epochs = epochs
    cfg.train.seed = seed
    cfg.train.crop = 32
    cfg.render.frame_size = (32, 32)
    cfg.render.n_per_class_per_scale = 3
    cfg.flow.levels = 2
    return cfg


class TestTrainLoop:
    @pytest.fixture(scope="class")
    @staticmethod
    def corpus(tmp_path_factory):
        root = tmp_path_factory.mktemp("corpus")
        build_dataset(str(root), 3, RenderConfig(frame_size=(32, 32)), seed=11)
        return str(root)

    @pytest.fixture(scope="class")
    @staticmethod
    def run(corpus, tmp_path_factory):
        out = tmp_path_factory.mktemp("run")
        summary = train(corpus, _tiny_cfg(), str(out))
        return summary

    def test_log_rows_follow_schema(self, run):
        with open(run["log"]) as fp:
            rows = [json.loads(line) for line in fp]
        assert len(rows) == 2
        for i, row in enumerate(rows):
            assert list(row) == list(LOG_KEYS)
            assert row["epoch"] == i

    def test_first_epoch_classification_loss_near_chance(self, run):
        with open(run["log"]) as fp:
            first = json.loads(fp.readline())
        assert abs(first["l_cls"] - math.log(4)) < 0.15

    def test_outputs_written(self, run):
        out_dir = os.path.dirname(run["checkpoint"])
        assert os.path.exists(run["checkpoint"])
        assert os.path.exists(os.path.join(out_dir, "config.json"))
        header, arrays = load_checkpoint(run["checkpoint"])
        assert header["classes"] == list(CLASSES)
        assert header["epoch"] == run["best_epoch"]
        assert any(k.startswith("velocity/") for k in arrays)

    def test_repeat_run_is_byte_identical(self, corpus, run, tmp_path):
        again = train(corpus, _tiny_cfg(), str(tmp_path / "again"))
        assert filecmp.cmp(run["log"], again["log"], shallow=False)
        assert filecmp.cmp(run["checkpoint"], again["checkpoint"], shallow=False)

    def test_different_seed_changes_the_log(self, corpus, run, tmp_path):
        other = train(corpus, _tiny_cfg(seed=1), str(tmp_path / "other"))
        assert not filecmp.cmp(run["log"], other["log"], shallow=False)

    def test_final_policy_saves_last_epoch(self, corpus, tmp_path):
        cfg = _tiny_cfg(epochs=1)
        cfg.train.checkpoint_policy = "final"
        summary = train(corpus, cfg, str(tmp_path / "final"))
        header, _ = load_checkpoint(summary["checkpoint"])
        assert header["epoch"] == 0
        assert summary["best_epoch"] == 0

    def test_evaluate_checkpoint_reports_per_class_metrics(self, corpus, run):
        report = evaluate_checkpoint(run["checkpoint"], corpus)
        assert report.class_names == CLASSES
        assert report.confusion.sum() == 12
        assert 0.0 <= report.accuracy <= 1.0

    def test_evaluate_checkpoint_rejects_class_mismatch(self, corpus, run):
        dataset = MavrDataset(corpus, preload=False)
        dataset.classes = ("a", "b", "c", "d")
        with pytest.raises(ValueError, match="class mismatch"):
            evaluate_checkpoint(run["checkpoint"], corpus, dataset=dataset)

    def test_nan_in_inputs_aborts_with_location(self, corpus, tmp_path):
        dataset = MavrDataset(corpus)
        for rec in dataset.records("train"):
            dataset.views(rec)["rgb"][:] = np.nan
        with pytest.raises(RuntimeError, match=r"aborting: .*epoch 0, batch 0"):
            train(corpus, _tiny_cfg(epochs=1), str(tmp_path / "nan"), dataset=dataset)

    def test_missing_manifest_rejected(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="manifest"):
            MavrDataset(str(tmp_path))
