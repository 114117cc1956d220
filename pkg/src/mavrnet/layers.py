"""Parameter containers and the stateful layers used by the network.

Weights use fan-in-scaled uniform init (bound = sqrt(1/fan_in)) drawn from the
caller's seeded generator; biases and norm offsets start at zero, norm gains
at one, so construction order fully determines the parameter state.
"""

import math

import numpy as np

from . import ops
from .tensor import Tensor


class Module:
    """Parameters and submodules are discovered by attribute walk, in
    construction order, giving stable checkpoint names."""

    def named_parameters(self, prefix: str = ""):
        for name, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                yield f"{prefix}{name}", val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{name}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())


def fan_in_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Conv3d(Module):
    def __init__(self, rng, in_channels, out_channels, kernel, stride=(1, 1, 1), padding=(0, 0, 0), bias=True):
        kt, kh, kw = kernel
        fan_in = in_channels * kt * kh * kw
        self.weight = Tensor(
            fan_in_uniform(rng, (out_channels, in_channels, kt, kh, kw), fan_in), requires_grad=True
        )
        self.bias = Tensor(np.zeros(out_channels, dtype=np.float32), requires_grad=True) if bias else None
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return ops.conv3d(x, self.weight, self.bias, self.stride, self.padding)


class GroupNorm(Module):
    def __init__(self, channels, groups: int = 8, eps: float = 1e-5):
        if channels % groups:
            raise ValueError(f"channels {channels} not divisible by norm groups {groups}")
        self.gamma = Tensor(np.ones(channels, dtype=np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=np.float32), requires_grad=True)
        self.groups = groups
        self.eps = eps

    def __call__(self, x):
        return ops.group_norm(x, self.gamma, self.beta, self.groups, self.eps)


class Linear(Module):
    def __init__(self, rng, d_in, d_out, bias=True):
        self.weight = Tensor(fan_in_uniform(rng, (d_in, d_out), d_in), requires_grad=True)
        self.bias = Tensor(np.zeros(d_out, dtype=np.float32), requires_grad=True) if bias else None

    def __call__(self, x):
        return ops.linear(x, self.weight, self.bias)
