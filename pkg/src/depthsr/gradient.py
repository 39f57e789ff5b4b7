"""Gradient-domain calibration of blurry depth structure.

`gradient_map` turns an image into an edge-strength map: the magnitude of
central differences, with replicate padding at the borders and a channel
mean for multi-channel inputs.  The calibrator fuses the RGB edge map with
the up-sampled depth edge map to predict a sharpened gradient image, then
merges it back into the depth feature and drops to low resolution.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .blocks import ChannelAttention, Conv2d, ResidualGroup, downsample_conv
from .tensor import _result

# below this magnitude the sqrt in gradient_map gets a zero gradient
_MAGNITUDE_FLOOR = 1e-12


def _central_diff(x, axis):
    xp = np.pad(x, [(1, 1) if a == axis else (0, 0) for a in range(x.ndim)], mode="edge")
    lead = tuple(slice(2, None) if a == axis else slice(None) for a in range(x.ndim))
    lag = tuple(slice(None, -2) if a == axis else slice(None) for a in range(x.ndim))
    return xp[lead] - xp[lag]


def _central_diff_adjoint(u, axis):
    def at(index):
        return tuple(index if a == axis else slice(None) for a in range(u.ndim))

    pad_shape = list(u.shape)
    pad_shape[axis] += 2
    gp = np.zeros(pad_shape)
    gp[at(slice(2, None))] += u
    gp[at(slice(None, -2))] -= u
    # fold the replicate-padding cells back onto the edge samples
    g = gp[at(slice(1, -1))].copy()
    g[at(0)] += gp[at(0)]
    g[at(-1)] += gp[at(-1)]
    return g


def gradient_map(z):
    """Edge-strength map of a (N,C,H,W) tensor as (N,1,H,W).

    Per channel: sqrt(dh^2 + dw^2) of central differences with replicate
    borders; channels are then averaged.  Gradient is zero wherever the
    per-channel magnitude sits below 1e-12.
    """
    zd = z.data
    if zd.ndim != 4:
        raise ValueError("gradient_map: expected a 4-D tensor")
    n, c, h, w = zd.shape
    if h < 3 or w < 3:
        raise ValueError(f"gradient_map: spatial extents must be >= 3, got {h}x{w}")
    dh = _central_diff(zd, 2)
    dw = _central_diff(zd, 3)
    mag = np.hypot(dh, dw)
    out = mag.mean(axis=1, keepdims=True)
    live = mag >= _MAGNITUDE_FLOOR
    safe = np.where(live, mag, 1.0)

    def vjp(g):
        u = np.where(live, (g / c) / safe, 0.0)
        return (_central_diff_adjoint(u * dh, 2) + _central_diff_adjoint(u * dw, 3),)

    return _result(out, (z,), vjp)


class GradientCalibrator:
    """Maps RGB and up-sampled depth to the gradient domain, calibrates the
    depth edges against the RGB prior, and emits the enhanced depth feature.
    """

    def __init__(self, store, name, channels, scale, block_depth, reduction, rng):
        self.fuse_in = Conv2d(store, f"{name}.fuse_in", 2, channels, 1, rng)
        self.fuse_group1 = ResidualGroup(store, f"{name}.fuse_group1", channels, block_depth, rng)
        self.fuse_group2 = ResidualGroup(store, f"{name}.fuse_group2", channels, block_depth, rng)
        self.fuse_attn = ChannelAttention(store, f"{name}.fuse_attn", channels, reduction, rng)
        self.fuse_out = Conv2d(store, f"{name}.fuse_out", channels, 1, 3, rng)
        self.enc_depth_lift = Conv2d(store, f"{name}.enc_depth.lift", 1, channels, 3, rng)
        self.enc_depth_group = ResidualGroup(store, f"{name}.enc_depth.group", channels, block_depth, rng)
        self.enc_grad_lift = Conv2d(store, f"{name}.enc_grad.lift", 1, channels, 3, rng)
        self.enc_grad_group = ResidualGroup(store, f"{name}.enc_grad.group", channels, block_depth, rng)
        self.down = downsample_conv(store, f"{name}.down", channels, channels, scale, rng)

    def calibrate(self, grad_rgb, grad_lr):
        """Predicted high-resolution gradient image (N,1,sh,sw)."""
        x = self.fuse_in(T.concat([grad_rgb, grad_lr]))
        x = self.fuse_attn(self.fuse_group2(self.fuse_group1(x)))
        return self.fuse_out(x)

    def __call__(self, rgb, depth_up):
        """Returns (enhanced depth feature at low res, calibrated gradient at high res)."""
        if rgb.data.shape[-2:] != depth_up.data.shape[-2:]:
            raise ValueError(
                f"calibrator: spatial mismatch rgb={rgb.data.shape} depth={depth_up.data.shape}")
        grad_sr = self.calibrate(gradient_map(rgb), gradient_map(depth_up))
        depth_feat = self.enc_depth_group(self.enc_depth_lift(depth_up))
        grad_feat = self.enc_grad_group(self.enc_grad_lift(grad_sr))
        enhanced = self.down(T.add(depth_feat, grad_feat))
        return enhanced, grad_sr
