"""Adam training loop, random crops, and the evaluation harness.

Runs are fully deterministic: the same seeds and configs produce
byte-identical checkpoints and metric logs.  Metrics are logged as
tab-separated lines (step, l_spa, l_gra, l_amp, l_pha, l_total, rmse_cm)
at every evaluation interval, and the checkpoint with the best validation
RMSE is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import tensor as T
from .data import DepthSample, SceneSpec, degrade, save_checkpoint, synth_scene
from .model import Network, compute_losses, rmse
from .tensor import Tensor, backward, no_grad

CM_PER_METER = 100.0


@dataclass
class TrainConfig:
    """Optimization and data-pool hyper-parameters."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    steps: int = 2000
    batch_size: int = 1
    crop_size: int = 32          # full-scale runs use 256x256 crops
    eval_interval: int = 100
    train_scenes: int = 64
    val_scenes: int = 16
    seed: int = 0
    checkpoint: str = "model.ckpt"
    log_path: str = None
    hr_size: int = 64
    num_primitives: int = 4
    z_min: float = 0.5
    z_max: float = 5.0

    def validate(self, scale):
        if self.crop_size % scale:
            raise ValueError(f"crop size {self.crop_size} not divisible by scale {scale}")
        for name in ("steps",):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("batch_size", "eval_interval", "train_scenes", "val_scenes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        return self


class AdamState:
    """First/second moment arrays plus the shared step counter."""

    def __init__(self, store):
        self.step = 0
        self.m = {n: np.zeros_like(p.data) for n, p in store.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in store.items()}


def adam_step(store, state, cfg):
    """One bias-corrected Adam update; clears gradients afterwards."""
    state.step += 1
    c1 = 1.0 - cfg.beta1 ** state.step
    c2 = 1.0 - cfg.beta2 ** state.step
    for name, param in store.items():
        if param.grad is None:
            raise ValueError(f"adam_step: parameter {name!r} has no gradient")
        g = param.grad
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        param.data = param.data - cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)
    store.zero_grad()


def random_crop(sample, crop, rng):
    """Scale-aligned random crop; the LR depth is re-derived by degradation."""
    s = sample.scale
    _, _, hh, ww = sample.depth_hr.data.shape
    if crop > hh or crop > ww:
        raise ValueError(f"crop {crop} exceeds extents {hh}x{ww}")
    if crop % s:
        raise ValueError(f"crop {crop} not divisible by scale {s}")
    y0 = s * int(rng.integers(0, (hh - crop) // s + 1))
    x0 = s * int(rng.integers(0, (ww - crop) // s + 1))
    rgb = Tensor(sample.rgb.data[:, :, y0:y0 + crop, x0:x0 + crop])
    depth_hr = Tensor(sample.depth_hr.data[:, :, y0:y0 + crop, x0:x0 + crop])
    return DepthSample(rgb=rgb, depth_hr=depth_hr, depth_lr=degrade(depth_hr, s),
                       scale=s, seed=sample.seed)


def build_pool(count, scale, cfg, seed_base):
    """Deterministic list of scenes for training or validation."""
    return [synth_scene(SceneSpec(
        height=cfg.hr_size, width=cfg.hr_size, scale=scale,
        num_primitives=cfg.num_primitives, z_min=cfg.z_min, z_max=cfg.z_max,
        seed=seed_base + i)) for i in range(count)]


@dataclass
class EvalResult:
    """Mean and per-sample RMSE (cm) of a model and the bicubic baseline."""

    mean_rmse_cm: float
    baseline_rmse_cm: float
    table: list


def evaluate(net, pool):
    """Deterministic RMSE of the network and of plain bicubic on a pool."""
    rows = []
    with no_grad():
        for idx, sample in enumerate(pool):
            pred, _ = net(sample.rgb, sample.depth_lr)
            base = T.bicubic_resize(sample.depth_lr, sample.scale)
            rows.append((idx,
                         rmse(pred, sample.depth_hr, CM_PER_METER),
                         rmse(base, sample.depth_hr, CM_PER_METER)))
    mean = float(np.mean([r[1] for r in rows]))
    baseline = float(np.mean([r[2] for r in rows]))
    return EvalResult(mean, baseline, rows)


def _batched(samples):
    rgb = np.concatenate([s.rgb.data for s in samples], axis=0)
    hr = np.concatenate([s.depth_hr.data for s in samples], axis=0)
    lr = np.concatenate([s.depth_lr.data for s in samples], axis=0)
    return Tensor(rgb), Tensor(hr), Tensor(lr)


@dataclass
class TrainResult:
    net: Network
    log_lines: list
    best_rmse_cm: float
    best_step: int
    final_rmse_cm: float
    baseline_rmse_cm: float


def train(cfg, mcfg, train_pool=None, val_pool=None):
    """Optimize a fresh network on a synthetic pool; saves the best checkpoint."""
    mcfg.validate()
    cfg.validate(mcfg.scale)
    net = Network(mcfg)
    state = AdamState(net.store)
    rng = np.random.default_rng(cfg.seed)
    if train_pool is None:
        train_pool = build_pool(cfg.train_scenes, mcfg.scale, cfg, seed_base=cfg.seed * 1_000_003)
    if val_pool is None:
        val_pool = build_pool(cfg.val_scenes, mcfg.scale, cfg, seed_base=cfg.seed * 1_000_003 + 500_000)

    log_lines = []
    best = None  # (rmse_cm, step, params snapshot)

    def checkpoint_if_best(step, score):
        nonlocal best
        if best is None or score < best[0]:
            best = (score, step, net.store.copy_data())

    baseline = evaluate(net, val_pool).baseline_rmse_cm
    if cfg.steps == 0:
        result = evaluate(net, val_pool)
        checkpoint_if_best(0, result.mean_rmse_cm)
    losses = None
    final_eval = None
    for step in range(1, cfg.steps + 1):
        picks = [train_pool[int(rng.integers(0, len(train_pool)))] for _ in range(cfg.batch_size)]
        crops = [random_crop(s, cfg.crop_size, rng) for s in picks]
        rgb, hr, lr = _batched(crops)
        pred, grad_sr = net(rgb, lr)
        losses = compute_losses(pred, grad_sr, hr, mcfg)
        total = losses.total.item()
        if not np.isfinite(total):
            raise RuntimeError(f"non-finite loss {total} at step {step}")
        backward(losses.total)
        adam_step(net.store, state, cfg)
        if step % cfg.eval_interval == 0 or step == cfg.steps:
            result = evaluate(net, val_pool)
            final_eval = result
            vals = losses.values()
            log_lines.append("\t".join([str(step)] + [repr(vals[k]) for k in
                                                      ("spa", "gra", "amp", "pha", "total")]
                                       + [repr(result.mean_rmse_cm)]))
            checkpoint_if_best(step, result.mean_rmse_cm)

    if best is None:
        result = evaluate(net, val_pool)
        final_eval = result
        checkpoint_if_best(cfg.steps, result.mean_rmse_cm)
    best_score, best_step, best_params = best
    snapshot = net.store.copy_data()
    net.store.load_data(best_params)
    save_checkpoint(net.store, mcfg, cfg.checkpoint)
    net.store.load_data(snapshot)

    if cfg.log_path:
        with open(cfg.log_path, "w") as fh:
            fh.write("\n".join(log_lines) + ("\n" if log_lines else ""))
    final_score = final_eval.mean_rmse_cm if final_eval is not None else best_score
    return TrainResult(net, log_lines, best_score, best_step, final_score, baseline)
