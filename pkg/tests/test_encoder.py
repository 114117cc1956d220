"""Stage-feature contracts for the per-view residual encoder."""

import numpy as np
import pytest

from mavrnet import ops
from mavrnet.encoder import BasicBlock, Encoder, EncoderConfig
from mavrnet.tensor import Tensor, no_grad


def _encode(encoder, x):
    with no_grad():
        return encoder(Tensor(x))


class TestShapes:
    @pytest.mark.parametrize("hw", [32, 64])
    @pytest.mark.parametrize("t", [1, 4, 16])
    def test_stage_shape_schedule(self, rng, hw, t):
        enc = Encoder(rng, EncoderConfig(in_channels=3))
        x = rng.standard_normal((3, t, hw, hw)).astype(np.float32)
        stages = _encode(enc, x)
        for i, (stage, ch) in enumerate(zip(stages, (16, 32, 64, 128))):
            scale = 4 * 2**i
            assert stage.shape == (ch, t, hw // scale, hw // scale)

    def test_batched_shape(self, rng):
        enc = Encoder(rng, EncoderConfig(in_channels=2))
        x = rng.standard_normal((2, 2, 4, 32, 32)).astype(np.float32)
        stages = _encode(enc, x)
        assert stages.c2.shape == (2, 16, 4, 8, 8)
        assert stages.c5.shape == (2, 128, 4, 1, 1)

    def test_temporal_extent_survives_every_stage(self, rng):
        enc = Encoder(rng, EncoderConfig(in_channels=1))
        for t in (1, 3, 16):
            stages = _encode(enc, rng.standard_normal((1, t, 32, 32)).astype(np.float32))
            assert all(s.shape[-3] == t for s in stages)

    def test_indivisible_extents_rejected(self, rng):
        enc = Encoder(rng, EncoderConfig(in_channels=3))
        with pytest.raises(ValueError, match="divisible by 32"):
            _encode(enc, np.zeros((3, 4, 48, 48), dtype=np.float32))

    def test_wrong_channel_count_rejected(self, rng):
        enc = Encoder(rng, EncoderConfig(in_channels=3))
        with pytest.raises(ValueError, match="channels"):
            _encode(enc, np.zeros((2, 4, 32, 32), dtype=np.float32))

    def test_width_validation(self):
        with pytest.raises(ValueError):
            EncoderConfig(in_channels=3, width=12)  # not divisible by 8 groups
        with pytest.raises(ValueError):
            EncoderConfig(in_channels=3, width=2)


class TestValues:
    def test_zero_input_gives_zero_stages(self, rng):
        # biases start at zero, norm of a zero field is zero, relu(0)=0
        enc = Encoder(rng, EncoderConfig(in_channels=3))
        stages = _encode(enc, np.zeros((3, 4, 32, 32), dtype=np.float32))
        for stage in stages:
            np.testing.assert_array_equal(stage.data, 0.0)

    def test_identical_clips_in_batch_give_identical_stages(self, rng):
        enc = Encoder(rng, EncoderConfig(in_channels=3))
        one = rng.standard_normal((3, 4, 32, 32)).astype(np.float32)
        batch = np.stack([one, one])
        stages = _encode(enc, batch)
        for stage in stages:
            np.testing.assert_allclose(stage.data[0], stage.data[1], rtol=1e-6, atol=1e-7)

    def test_stage_block_count(self, rng):
        enc = Encoder(rng, EncoderConfig(in_channels=3))
        assert len(enc.stages) == 8
        projected = [blk.proj is not None for blk in enc.stages]
        # channel or stride changes force a projection only on each stage's first block
        assert projected == [False, False, True, False, True, False, True, False]


class TestMirrorSymmetry:
    """Reflection behaviour is exact only where no even-extent downsampling
    intervenes; the stride-1 residual block on an odd width is such a case."""

    def test_block_equivariant_on_odd_width(self, rng):
        blk = BasicBlock(rng, 8, 8, 1, 8)
        x = rng.standard_normal((1, 8, 3, 5, 33)).astype(np.float64)
        for conv in (blk.conv1, blk.conv2):
            conv.weight.data = conv.weight.data.astype(np.float64)
            conv.bias.data = conv.bias.data.astype(np.float64)
        for norm in (blk.norm1, blk.norm2):
            norm.gamma.data = norm.gamma.data.astype(np.float64)
            norm.beta.data = norm.beta.data.astype(np.float64)

        with no_grad():
            base = blk(Tensor(x)).data
        for conv in (blk.conv1, blk.conv2):
            conv.weight.data = conv.weight.data[..., ::-1].copy()
        with no_grad():
            mirrored = blk(Tensor(x[..., ::-1].copy())).data
        np.testing.assert_allclose(mirrored[..., ::-1], base, rtol=1e-9, atol=1e-11)

    def test_temporal_reversal_with_symmetric_kernels(self, rng):
        # kernels made even in t: reversing the clip reverses the block output
        blk = BasicBlock(rng, 8, 8, 1, 8)
        for conv in (blk.conv1, blk.conv2):
            w = conv.weight.data
            conv.weight.data = 0.5 * (w + w[:, :, ::-1])
        x = rng.standard_normal((1, 8, 6, 5, 5)).astype(np.float32)
        with no_grad():
            base = blk(Tensor(x)).data
            reversed_out = blk(Tensor(x[:, :, ::-1].copy())).data
        np.testing.assert_allclose(reversed_out[:, :, ::-1], base, rtol=1e-4, atol=1e-5)


def test_parameter_gradients_flow_everywhere(rng):
    enc = Encoder(rng, EncoderConfig(in_channels=2, width=8))
    x = Tensor(rng.standard_normal((2, 2, 32, 32)).astype(np.float32))
    stages = enc(x)
    loss = ops.tensor_sum(stages.c5) + ops.tensor_sum(stages.c2)
    loss.backward()
    missing = [name for name, p in enc.named_parameters() if p.grad is None]
    assert missing == []
