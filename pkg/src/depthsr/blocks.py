"""Learnable building blocks: convolutions, residual groups, channel
attention, invertible couplings, and resample-then-convolve layers.

Weights start uniform in +-1/sqrt(fan_in) from the run seed; biases start
at zero.  Block forwards only read parameters, so concurrent inference
with shared parameters is safe; training mutates them and needs exclusive
access.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor

LEAKY_SLOPE = 0.2
# soft bound on the coupling log-scale so exp stays tame for any input
COUPLING_CLAMP = 2.0


class Conv2d:
    """3x3 (or 1x1) convolution parameters registered under a name prefix."""

    def __init__(self, store, name, cin, cout, ksize, rng):
        bound = 1.0 / np.sqrt(cin * ksize * ksize)
        w = rng.uniform(-bound, bound, size=(cout, cin, ksize, ksize))
        self.weight = store.add(f"{name}.weight", Tensor(w))
        self.bias = store.add(f"{name}.bias", Tensor(np.zeros(cout)))
        self.padding = ksize // 2

    def __call__(self, x):
        return T.conv2d(x, self.weight, self.bias, stride=1, padding=self.padding)


class ResidualBlock:
    """conv3x3 -> leaky_relu -> conv3x3 around an identity skip."""

    def __init__(self, store, name, channels, rng):
        self.c1 = Conv2d(store, f"{name}.conv1", channels, channels, 3, rng)
        self.c2 = Conv2d(store, f"{name}.conv2", channels, channels, 3, rng)

    def __call__(self, x):
        return T.add(x, self.c2(T.leaky_relu(self.c1(x), LEAKY_SLOPE)))


class ResidualGroup:
    """Stack of residual blocks, a tail conv, and a group-level skip.

    The tail conv keeps the zero-weight group an exact identity map.
    """

    def __init__(self, store, name, channels, depth, rng):
        self.blocks = [ResidualBlock(store, f"{name}.blk{i:02d}", channels, rng)
                       for i in range(depth)]
        self.tail = Conv2d(store, f"{name}.tail", channels, channels, 3, rng)

    def __call__(self, x):
        body = x
        for blk in self.blocks:
            body = blk(body)
        return T.add(x, self.tail(body))


class ChannelAttention:
    """Per-channel sigmoid gate from pooled descriptors.

    A shared two-layer bottleneck (reduction ratio r) maps the mean- and
    max-pooled channel vectors; the summed logits gate the input.
    """

    def __init__(self, store, name, channels, reduction, rng):
        if channels % reduction:
            raise ValueError(f"channels {channels} not divisible by reduction {reduction}")
        hidden = channels // reduction
        self.squeeze = Conv2d(store, f"{name}.squeeze", channels, hidden, 1, rng)
        self.expand = Conv2d(store, f"{name}.expand", hidden, channels, 1, rng)

    def _mlp(self, pooled):
        return self.expand(T.leaky_relu(self.squeeze(pooled), LEAKY_SLOPE))

    def __call__(self, x):
        logits = T.add(self._mlp(T.global_pool(x, "mean")),
                       self._mlp(T.global_pool(x, "max")))
        gate = T.sigmoid(logits)
        _, _, h, w = x.data.shape
        return T.mul(x, T.tile_spatial(gate, h, w))


class _CouplingSubnet:
    """conv3x3 -> leaky_relu -> conv3x3 conditioner used for scale and shift."""

    def __init__(self, store, name, channels, rng):
        self.c1 = Conv2d(store, f"{name}.conv1", channels, channels, 3, rng)
        self.c2 = Conv2d(store, f"{name}.conv2", channels, channels, 3, rng)

    def __call__(self, x):
        return self.c2(T.leaky_relu(self.c1(x), LEAKY_SLOPE))


class CouplingBlock:
    """Affine coupling over a channel split: y1 = x1, y2 = x2*exp(s(x1)) + t(x1).

    The log-scale passes through a soft clamp c*tanh(s/c), so the block is
    algebraically invertible for any weights and inputs.
    """

    def __init__(self, store, name, half_channels, rng):
        self.half = half_channels
        self.snet = _CouplingSubnet(store, f"{name}.snet", half_channels, rng)
        self.tnet = _CouplingSubnet(store, f"{name}.tnet", half_channels, rng)

    def _split(self, x):
        nchan = x.data.shape[1]
        if nchan != 2 * self.half:
            raise ValueError(f"coupling: expected {2 * self.half} channels, got {nchan}")
        return T.slice_channels(x, 0, self.half), T.slice_channels(x, self.half, nchan)

    def _log_scale(self, x1):
        raw = self.snet(x1)
        return T.scale(T.tanh(T.scale(raw, 1.0 / COUPLING_CLAMP)), COUPLING_CLAMP)

    def forward(self, x):
        """Coupled halves as a (y1, y2) pair."""
        x1, x2 = self._split(x)
        y2 = T.add(T.mul(x2, T.exp(self._log_scale(x1))), self.tnet(x1))
        return x1, y2

    def forward_merged(self, x):
        """Same transform with the halves re-concatenated."""
        y1, y2 = self.forward(x)
        return T.concat([y1, y2])

    def inverse(self, y1, y2):
        """Recover (x1, x2) from the forward outputs."""
        x1 = y1
        x2 = T.mul(T.sub(y2, self.tnet(x1)), T.exp(T.scale(self._log_scale(x1), -1.0)))
        return x1, x2


class ResampleConv:
    """Bicubic resize by the scale factor followed by a 3x3 convolution.

    factor > 1 up-samples, factor < 1 down-samples, factor 1 degenerates
    to the bare convolution.
    """

    def __init__(self, store, name, cin, cout, factor, rng):
        self.factor = factor
        self.conv = Conv2d(store, f"{name}.conv", cin, cout, 3, rng)

    def __call__(self, x):
        if self.factor != 1:
            x = T.bicubic_resize(x, self.factor)
        return self.conv(x)


def downsample_conv(store, name, cin, cout, scale, rng):
    return ResampleConv(store, name, cin, cout, 1.0 / scale, rng)


def upsample_conv(store, name, cin, cout, scale, rng):
    return ResampleConv(store, name, cin, cout, float(scale), rng)
