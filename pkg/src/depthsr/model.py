"""Full network assembly, the three-domain training loss, and metrics.

The network predicts a high-resolution residual that is added onto the
bicubic up-sampling of the low-resolution depth, so zeroing the output
head reduces it exactly to the bicubic baseline.  The loss combines a
spatial L1 term, a gradient-map L1 term on the calibrated gradient
prediction, and amplitude/phase L1 terms on the spectra of prediction and
ground truth, weighted total = spa + g1*gra + g2*(l1*amp + l2*pha) with
defaults l1 = l2 = 0.5, g1 = 0.001, g2 = 0.002.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .gradient import GradientCalibrator, gradient_map
from .frequency import FrequencyRefiner
from .params import ParamStore
from .spectral import decompose, dft2
from .tensor import Tensor

SUPPORTED_SCALES = (2, 4, 8, 16)


@dataclass
class ModelConfig:
    """Architecture and loss hyper-parameters."""

    channels: int = 8
    sdb_count: int = 3
    scale: int = 4
    lambda_amp: float = 0.5
    lambda_pha: float = 0.5
    gamma_gra: float = 0.001
    gamma_fre: float = 0.002
    block_depth: int = 2
    attention_ratio: int = 4
    seed: int = 0

    def validate(self):
        if self.scale not in SUPPORTED_SCALES:
            raise ValueError(f"scale must be one of {SUPPORTED_SCALES}, got {self.scale}")
        if self.channels % 2:
            raise ValueError("channels must be even for the coupling split")
        if self.channels % self.attention_ratio:
            raise ValueError("channels must be divisible by the attention ratio")
        if self.sdb_count < 1 or self.block_depth < 1:
            raise ValueError("sdb_count and block_depth must be >= 1")
        for name in ("lambda_amp", "lambda_pha", "gamma_gra", "gamma_fre"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        return self


class Network:
    """Calibrator + refiner sharing one parameter store."""

    def __init__(self, config):
        config.validate()
        self.config = config
        self.store = ParamStore()
        rng = np.random.default_rng(config.seed)
        self.calibrator = GradientCalibrator(
            self.store, "gcm", config.channels, config.scale,
            config.block_depth, config.attention_ratio, rng)
        self.refiner = FrequencyRefiner(
            self.store, "fam", config.channels, config.sdb_count,
            config.scale, config.block_depth, rng)

    def __call__(self, rgb, depth_lr):
        """Super-resolve: returns (depth_sr, grad_sr) at high resolution."""
        s = self.config.scale
        n, _, h, w = depth_lr.data.shape
        if rgb.data.shape[-2:] != (h * s, w * s):
            raise ValueError(
                f"rgb extents {rgb.data.shape[-2:]} != scale {s} times depth {h}x{w}")
        depth_up = T.bicubic_resize(depth_lr, s)
        enhanced, grad_sr = self.calibrator(rgb, depth_up)
        residual = self.refiner(rgb, depth_lr, enhanced)
        return T.add(residual, depth_up), grad_sr


@dataclass
class LossBreakdown:
    """Scalar loss tensors; `total` is the one to backpropagate."""

    spa: Tensor
    gra: Tensor
    amp: Tensor
    pha: Tensor
    fre: Tensor
    total: Tensor

    def values(self):
        return {name: getattr(self, name).item()
                for name in ("spa", "gra", "amp", "pha", "fre", "total")}


def compute_losses(depth_sr, grad_sr, depth_hr, config):
    """Three-domain loss of a prediction against ground truth."""
    if depth_sr.data.shape != depth_hr.data.shape:
        raise ValueError("loss: prediction and ground truth shapes differ")
    if grad_sr.data.shape[-2:] != depth_hr.data.shape[-2:]:
        raise ValueError("loss: gradient prediction is not at ground-truth resolution")
    spa = T.reduce_mean_abs(depth_sr, depth_hr)
    gra = T.reduce_mean_abs(grad_sr, gradient_map(depth_hr))
    polar_sr = decompose(dft2(depth_sr))
    polar_hr = decompose(dft2(depth_hr))
    amp = T.reduce_mean_abs(polar_sr.amplitude, polar_hr.amplitude)
    pha = T.reduce_mean_abs(polar_sr.phase, polar_hr.phase)
    fre = T.add(T.scale(amp, config.lambda_amp), T.scale(pha, config.lambda_pha))
    total = T.add(spa, T.add(T.scale(gra, config.gamma_gra), T.scale(fre, config.gamma_fre)))
    return LossBreakdown(spa, gra, amp, pha, fre, total)


def rmse(depth_sr, depth_hr, unit_scale=100.0):
    """Root mean square error, converted to centimeters by unit_scale."""
    a = depth_sr.data if isinstance(depth_sr, Tensor) else np.asarray(depth_sr)
    b = depth_hr.data if isinstance(depth_hr, Tensor) else np.asarray(depth_hr)
    if a.shape != b.shape:
        raise ValueError(f"rmse: shape mismatch {a.shape} vs {b.shape}")
    if unit_scale <= 0:
        raise ValueError("rmse: unit_scale must be positive")
    return float(unit_scale * np.sqrt(np.mean((a - b) ** 2)))


def zero_output_head(net):
    """Zero the refiner's final convolution, making the net pure bicubic."""
    head = net.refiner.head_out
    head.weight.data = np.zeros_like(head.weight.data)
    head.bias.data = np.zeros_like(head.bias.data)
