"""Guided depth super-resolution on a small float64 autodiff engine.

An aligned high-resolution RGB image steers the recovery of a
high-resolution depth map from a low-resolution one, working in three
domains at once: gradient-domain calibration sharpens blurry depth edges
against the RGB edge prior, frequency-domain spectrum differencing
re-injects the high-frequency content the depth lacks, and the training
loss supervises the spatial, gradient, and spectral views together.
"""

from .tensor import (Tensor, add, sub, mul, scale, absolute, leaky_relu, sigmoid,
                     exp, tanh, cos, sin, concat, slice_channels, tile_spatial,
                     reduce_mean_abs, global_pool, conv2d, bicubic_resize,
                     backward, no_grad)
from .spectral import ComplexSpectrum, AmplitudePhase, dft2, idft2, decompose, compose
from .params import ParamStore
from .gradient import gradient_map, GradientCalibrator
from .frequency import SpectrumDiffBlock, FrequencyRefiner
from .model import (ModelConfig, Network, LossBreakdown, compute_losses, rmse,
                    zero_output_head)
from .data import (SceneSpec, DepthSample, synth_scene, degrade, read_image,
                   write_image, save_checkpoint, load_checkpoint)
from .training import (TrainConfig, AdamState, adam_step, random_crop, build_pool,
                       train, evaluate)
from .gradcheck import build_instance, run_check, check_model
from .cli import cli

__version__ = "0.1.0"

__all__ = [
    "Tensor", "add", "sub", "mul", "scale", "absolute", "leaky_relu", "sigmoid",
    "exp", "tanh", "cos", "sin", "concat", "slice_channels", "tile_spatial",
    "reduce_mean_abs", "global_pool", "conv2d", "bicubic_resize", "backward",
    "no_grad", "ComplexSpectrum", "AmplitudePhase", "dft2", "idft2", "decompose",
    "compose", "ParamStore", "gradient_map", "GradientCalibrator",
    "SpectrumDiffBlock", "FrequencyRefiner", "ModelConfig", "Network",
    "LossBreakdown", "compute_losses", "rmse", "zero_output_head", "SceneSpec",
    "DepthSample", "synth_scene", "degrade", "read_image", "write_image",
    "save_checkpoint", "load_checkpoint", "TrainConfig", "AdamState", "adam_step",
    "random_crop", "build_pool", "train", "evaluate", "build_instance",
    "run_check", "check_model", "cli",
]
