"""Closed-form oracles and gradient checks for the three objectives."""

import math

import numpy as np
import pytest

from mavrnet import ops
from mavrnet.gradcheck import check_gradients
from mavrnet.losses import (
    LossWeights,
    alignment_loss,
    attention_entropy_loss,
    classification_loss,
    total_loss,
)
from mavrnet.tensor import Tensor


def _unit_rows(rng, b, k):
    m = rng.standard_normal((b, k))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


class TestClassification:
    def test_uniform_logits_give_log_n_classes(self):
        logits = np.zeros((6, 4), dtype=np.float64)
        labels = [0, 1, 2, 3, 0, 2]
        loss = classification_loss(Tensor(logits), labels)
        assert abs(loss.item() - math.log(4)) < 1e-6

    def test_saturated_true_logit_vanishes(self):
        logits = np.zeros((1, 4))
        logits[0, 2] = 20.0
        assert classification_loss(Tensor(logits), [2]).item() < 1e-8

    def test_single_hot_logit_closed_form(self):
        loss = classification_loss(Tensor(np.array([[1.0, 0, 0, 0]])), [0])
        expect = -math.log(math.e / (math.e + 3))  # 0.7437...
        assert abs(loss.item() - expect) < 1e-6
        assert abs(loss.item() - 0.7437) < 5e-5

    def test_shift_invariance(self, rng):
        logits = rng.standard_normal((5, 4))
        labels = rng.integers(0, 4, 5)
        a = classification_loss(Tensor(logits), labels).item()
        b = classification_loss(Tensor(logits + 1000.0), labels).item()
        assert abs(a - b) < 1e-9

    def test_gradient_is_softmax_minus_onehot(self, rng):
        logits = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
        labels = np.array([2, 0, 3, 1])
        classification_loss(logits, labels).backward()
        z = logits.data - logits.data.max(axis=1, keepdims=True)
        softmax = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        onehot = np.eye(4)[labels]
        np.testing.assert_allclose(logits.grad, (softmax - onehot) / 4, rtol=1e-7, atol=1e-10)

    def test_label_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="range"):
            classification_loss(Tensor(np.zeros((1, 4))), [4])

    @pytest.mark.parametrize("seed", range(200, 210))
    def test_finite_difference_gradient(self, seed):
        rng = np.random.default_rng(seed)
        logits = rng.standard_normal((3, 4))
        labels = rng.integers(0, 4, 3)
        check_gradients(lambda z: classification_loss(z, labels), [logits])


class TestAlignment:
    TAU = 0.07

    def test_identical_orthonormal_views_near_zero(self):
        emb = np.eye(4)
        loss = alignment_loss(Tensor(emb), Tensor(emb), Tensor(emb)).item()
        expect = -1.0 / self.TAU + math.log(3 + math.exp(1.0 / self.TAU))
        assert abs(loss - expect) < 1e-9
        assert loss <= 1e-5  # ~1.87e-6

    def test_constant_rows_give_log_batch(self):
        for b in (2, 3, 5):
            row = np.zeros((b, 6))
            row[:, 0] = 1.0
            loss = alignment_loss(Tensor(row), Tensor(row), Tensor(row)).item()
            assert abs(loss - math.log(b)) < 1e-6

    def test_single_sample_batch_is_zero(self):
        e = np.array([[1.0, 0.0]])
        assert abs(alignment_loss(Tensor(e), Tensor(e), Tensor(e)).item()) < 1e-12

    def test_swapped_rows_pay_at_least_log_two(self):
        eye = np.eye(2)
        swapped = eye[::-1].copy()
        loss = alignment_loss(Tensor(eye), Tensor(swapped), Tensor(eye)).item()
        # pairs (rgb,flow) and (flow,mask) are misaligned, (rgb,mask) is clean
        clean = -1.0 / self.TAU + math.log(1 + math.exp(1.0 / self.TAU))
        assert loss >= (2 * math.log(2) + clean) / 3 - 1e-9

    def test_invariant_under_common_rotation(self, rng):
        b, k = 5, 8
        views = [_unit_rows(rng, b, k) for _ in range(3)]
        q, _ = np.linalg.qr(rng.standard_normal((k, k)))
        base = alignment_loss(*(Tensor(v) for v in views)).item()
        rotated = alignment_loss(*(Tensor(v @ q) for v in views)).item()
        assert abs(base - rotated) < 1e-9

    def test_identical_views_minimize_over_misalignments(self, rng):
        """Holding each view's internal geometry orthonormal and rotating the
        views independently, the identical configuration is never beaten.
        (Free row perturbations can undercut the base by making off-diagonal
        similarities slightly negative, so they are not a valid probe here.)"""
        from scipy.linalg import expm

        base_emb = np.eye(4)
        base = alignment_loss(Tensor(base_emb), Tensor(base_emb), Tensor(base_emb)).item()
        for _ in range(100):
            views = []
            for _ in range(3):
                a = rng.standard_normal((4, 4)) * 0.05
                views.append(base_emb @ expm(a - a.T))
            assert base <= alignment_loss(*(Tensor(v) for v in views)).item() + 1e-15

    def test_non_unit_rows_rejected(self, rng):
        good = _unit_rows(rng, 3, 4)
        bad = good * 1.01
        with pytest.raises(ValueError, match="unit-norm"):
            alignment_loss(Tensor(good), Tensor(bad), Tensor(good))

    @pytest.mark.parametrize("seed", range(300, 310))
    def test_finite_difference_gradient(self, seed):
        rng = np.random.default_rng(seed)
        raws = [rng.standard_normal((3, 5)) for _ in range(3)]

        def fn(a, b, c):
            return alignment_loss(
                ops.l2_normalize(a, axis=-1), ops.l2_normalize(b, axis=-1), ops.l2_normalize(c, axis=-1)
            )

        check_gradients(fn, raws)


class TestAttentionEntropy:
    def test_uniform_rows_hit_lower_bound(self):
        t = 4
        trace = np.full((2, 3, t, t), 1.0 / t)
        loss = attention_entropy_loss(Tensor(trace)).item()
        assert abs(loss - (-math.log(t))) < 1e-6

    def test_one_hot_rows_are_zero(self):
        trace = np.zeros((1, 2, 3, 3))
        trace[..., np.arange(3), np.arange(3)] = 1.0
        assert attention_entropy_loss(Tensor(trace)).item() == 0.0

    def test_repeated_row_hand_value(self):
        row = np.array([0.5, 0.25, 0.25])
        trace = np.tile(row, (1, 1, 3, 1))
        expect = 0.5 * math.log(0.5) + 2 * 0.25 * math.log(0.25)  # -1.0397
        loss = attention_entropy_loss(Tensor(trace)).item()
        assert abs(loss - expect) < 1e-6
        assert abs(loss - (-1.0397)) < 5e-5

    def test_bounded_by_entropy_extremes(self, rng):
        t = 5
        logits = rng.standard_normal((3, 2, t, t)) * 3
        e = np.exp(logits)
        trace = e / e.sum(axis=-1, keepdims=True)
        loss = attention_entropy_loss(Tensor(trace)).item()
        assert -math.log(t) - 1e-9 <= loss <= 0.0

    @pytest.mark.parametrize("seed", range(400, 410))
    def test_finite_difference_gradient(self, seed):
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((1, 2, 3, 3))
        check_gradients(lambda z: attention_entropy_loss(ops.softmax(z, axis=-1)), [raw])


class TestTotal:
    def test_identity_on_pure_classification(self):
        assert total_loss(Tensor(np.float64(1.0)), 0.0, 0.0).item() == 1.0

    def test_default_weight_arithmetic(self):
        loss = total_loss(Tensor(np.float64(1.0)), Tensor(np.float64(2.0)), Tensor(np.float64(-1.0)))
        assert abs(loss.item() - 1.9) < 1e-12

    def test_zero_weights_reduce_to_classification(self, rng):
        w = LossWeights(lambda1=0.0, lambda2=0.0)
        cls = Tensor(np.float64(0.73))
        loss = total_loss(cls, Tensor(np.float64(5.0)), Tensor(np.float64(-3.0)), w)
        assert loss.item() == cls.item()

    def test_zero_weight_terms_receive_no_gradient(self, rng):
        logits = Tensor(rng.standard_normal((2, 4)), requires_grad=True)
        emb = Tensor(_unit_rows(rng, 2, 4), requires_grad=True)
        trace = Tensor(np.full((2, 1, 2, 2), 0.5), requires_grad=True)
        cls = classification_loss(logits, [0, 1])
        align = alignment_loss(emb, emb, emb)
        att = attention_entropy_loss(trace)
        total_loss(cls, align, att, LossWeights(lambda1=0.0, lambda2=0.0)).backward()
        assert logits.grad is not None
        assert emb.grad is None
        assert trace.grad is None

    def test_nan_component_names_culprit(self):
        with pytest.raises(FloatingPointError, match="alignment"):
            total_loss(Tensor(np.float64(1.0)), Tensor(np.float64(np.nan)), Tensor(np.float64(0.0)))

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            LossWeights(tau=0.0)
        with pytest.raises(ValueError):
            LossWeights(lambda1=-0.1)

    @pytest.mark.parametrize("seed", range(500, 510))
    def test_combined_finite_difference_gradient(self, seed):
        rng = np.random.default_rng(seed)
        logits = rng.standard_normal((3, 4))
        raw_embs = [rng.standard_normal((3, 5)) for _ in range(3)]
        raw_trace = rng.standard_normal((3, 2, 4, 4))
        labels = rng.integers(0, 4, 3)

        def fn(z, a, b, c, tr):
            cls = classification_loss(z, labels)
            align = alignment_loss(
                ops.l2_normalize(a, axis=-1), ops.l2_normalize(b, axis=-1), ops.l2_normalize(c, axis=-1)
            )
            att = attention_entropy_loss(ops.softmax(tr, axis=-1))
            return total_loss(cls, align, att)

        check_gradients(fn, [logits, *raw_embs, raw_trace])
