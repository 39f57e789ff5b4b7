"""Frequency-domain refinement of depth features.

A spectrum differencing block lifts the fused depth feature to high
resolution, compares its per-channel amplitude and phase spectra against
the RGB feature spectra, re-injects the missing high-frequency content
through learned 1x1 paths, and couples the result back into the spatial
feature before returning to low resolution.  The refiner runs n such
blocks in sequence (each consumes the previous block's outputs, so the
recursion cannot be parallelized) and aggregates the per-block depth
features into a one-channel high-resolution residual.
"""

from __future__ import annotations

from . import tensor as T
from .blocks import Conv2d, CouplingBlock, ResidualGroup, downsample_conv, upsample_conv
from .spectral import AmplitudePhase, compose, decompose, dft2, idft2


class _PointwiseStack:
    """conv1x1 -> leaky_relu -> conv1x1 feature extractor for spectra."""

    def __init__(self, store, name, channels, rng):
        self.c1 = Conv2d(store, f"{name}.conv1", channels, channels, 1, rng)
        self.c2 = Conv2d(store, f"{name}.conv2", channels, channels, 1, rng)

    def __call__(self, x):
        return self.c2(T.leaky_relu(self.c1(x)))


class SpectrumDiffBlock:
    """One refinement stage mixing spatial and frequency structure."""

    def __init__(self, store, name, channels, scale, rng):
        c = channels
        self.fuse = Conv2d(store, f"{name}.fuse", 2 * c, c, 3, rng)
        self.up = upsample_conv(store, f"{name}.up", c, c, scale, rng)
        self.amp_main = _PointwiseStack(store, f"{name}.amp_main", c, rng)
        self.amp_diff = _PointwiseStack(store, f"{name}.amp_diff", c, rng)
        self.pha_main = _PointwiseStack(store, f"{name}.pha_main", c, rng)
        self.pha_diff = _PointwiseStack(store, f"{name}.pha_diff", c, rng)
        self.amp_mix = Conv2d(store, f"{name}.amp_mix", 2 * c, c, 1, rng)
        self.pha_mix = Conv2d(store, f"{name}.pha_mix", 2 * c, c, 1, rng)
        self.couple_rgb = CouplingBlock(store, f"{name}.couple_rgb", c, rng)
        self.couple_out = CouplingBlock(store, f"{name}.couple_out", c, rng)
        self.down = downsample_conv(store, f"{name}.down", c, c, scale, rng)

    def spectra(self, rgb_feat, depth_feat, enhanced):
        """Polar spectra of the lifted depth feature and the RGB feature.

        Returns (depth_fused_hr, depth_polar, rgb_polar); exposed so the
        amplitude maps can be dumped for inspection.
        """
        fused_hr = self.up(self.fuse(T.concat([enhanced, depth_feat])))
        return fused_hr, decompose(dft2(fused_hr)), decompose(dft2(rgb_feat))

    def __call__(self, rgb_feat, depth_feat, enhanced):
        if rgb_feat.data.shape[0] != depth_feat.data.shape[0]:
            raise ValueError("spectrum block: batch mismatch")
        if depth_feat.data.shape != enhanced.data.shape:
            raise ValueError(
                f"spectrum block: depth feature {depth_feat.data.shape} vs "
                f"enhanced feature {enhanced.data.shape}")
        fused_hr, depth_polar, rgb_polar = self.spectra(rgb_feat, depth_feat, enhanced)

        amp_gap = T.absolute(T.sub(rgb_polar.amplitude, depth_polar.amplitude))
        pha_gap = T.absolute(T.sub(rgb_polar.phase, depth_polar.phase))
        amp_fused = self.amp_mix(T.concat([self.amp_main(depth_polar.amplitude),
                                           self.amp_diff(amp_gap)]))
        pha_fused = self.pha_mix(T.concat([self.pha_main(depth_polar.phase),
                                           self.pha_diff(pha_gap)]))
        freq_feat = idft2(compose(AmplitudePhase(amp_fused, pha_fused)))

        rgb_out, spatial = self.couple_rgb.forward(T.concat([rgb_feat, fused_hr]))
        # second coupling of (spatial, frequency); its transformed half is the
        # residual added onto the fused feature
        _, residual = self.couple_out.forward(T.concat([spatial, freq_feat]))
        depth_out = self.down(T.add(fused_hr, residual))
        return rgb_out, depth_out


class FrequencyRefiner:
    """Recursive spectrum differencing over encoded RGB/depth features."""

    def __init__(self, store, name, channels, count, scale, block_depth, rng):
        if count < 1:
            raise ValueError(f"refiner needs at least one block, got {count}")
        c = channels
        self.enc_rgb_lift = Conv2d(store, f"{name}.enc_rgb.lift", 3, c, 3, rng)
        self.enc_rgb_group = ResidualGroup(store, f"{name}.enc_rgb.group", c, block_depth, rng)
        self.enc_depth_lift = Conv2d(store, f"{name}.enc_depth.lift", 1, c, 3, rng)
        self.enc_depth_group = ResidualGroup(store, f"{name}.enc_depth.group", c, block_depth, rng)
        self.blocks = [SpectrumDiffBlock(store, f"{name}.sdb{i:02d}", c, scale, rng)
                       for i in range(count)]
        self.agg = ResidualGroup(store, f"{name}.agg", count * c, block_depth, rng)
        self.head_up = upsample_conv(store, f"{name}.head_up", count * c, c, scale, rng)
        self.head_out = Conv2d(store, f"{name}.head_out", c, 1, 3, rng)

    def encode(self, rgb, depth_lr):
        rgb_feat = self.enc_rgb_group(self.enc_rgb_lift(rgb))
        depth_feat = self.enc_depth_group(self.enc_depth_lift(depth_lr))
        return rgb_feat, depth_feat

    def __call__(self, rgb, depth_lr, enhanced):
        rgb_feat, depth_feat = self.encode(rgb, depth_lr)
        if depth_feat.data.shape[1] != enhanced.data.shape[1]:
            raise ValueError("refiner: channel width differs from calibrator output")
        history = []
        for block in self.blocks:
            rgb_feat, depth_feat = block(rgb_feat, depth_feat, enhanced)
            history.append(depth_feat)
        # the activation after up-sampling lets the head decode sub-pixel
        # structure from the multi-channel low-resolution features
        return self.head_out(T.leaky_relu(self.head_up(self.agg(T.concat(history)))))
