"""Command-line surface: train, infer, eval, degrade, spectra-dump, gradcheck.

Config files are flat ``key = value`` text; blank lines and ``#`` comments
are ignored and unknown keys are rejected.  Exit codes: 0 success, 1 usage
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import tensor as T
from .data import (SceneSpec, degrade, load_checkpoint, read_depth_range,
                   read_image, save_checkpoint, synth_scene, write_image)
from .gradcheck import build_instance, run_check
from .model import ModelConfig, Network
from .tensor import Tensor, no_grad
from .training import TrainConfig, evaluate, train

_MODEL_KEYS = {
    "channels", "sdb_count", "scale", "lambda_amp", "lambda_pha",
    "gamma_gra", "gamma_fre", "block_depth", "attention_ratio", "model_seed",
}
_TRAIN_KEYS = {
    "learning_rate", "beta1", "beta2", "epsilon", "steps", "batch_size",
    "crop_size", "eval_interval", "train_scenes", "val_scenes", "seed",
    "checkpoint", "log_path", "hr_size", "num_primitives", "z_min", "z_max",
}
_POOL_KEYS = {"scenes", "hr_size", "num_primitives", "z_min", "z_max", "seed"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_config(path):
    """Flat key=value text into a dict of str/int/float values."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, _, text = line.partition("=")
            key, text = key.strip(), text.strip()
            try:
                value = int(text)
            except ValueError:
                try:
                    value = float(text)
                except ValueError:
                    value = text
            values[key] = value
    return values


def _apply(cls, values, rename=None):
    fields = {f.name: f.type for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        name = (rename or {}).get(key, key)
        if name not in fields:
            raise UsageError(f"unknown key {key!r} for {cls.__name__}")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def load_run_config(path):
    """Split one config file into (TrainConfig, ModelConfig)."""
    values = parse_config(path)
    unknown = set(values) - _MODEL_KEYS - _TRAIN_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    mvals = {k: v for k, v in values.items() if k in _MODEL_KEYS}
    tvals = {k: v for k, v in values.items() if k in _TRAIN_KEYS}
    mcfg = _apply(ModelConfig, mvals, rename={"model_seed": "seed"})
    tcfg = _apply(TrainConfig, tvals)
    return tcfg, mcfg


def load_network(path):
    """Rebuild a Network from a checkpoint file."""
    store, config = load_checkpoint(path)
    net = Network(config)
    net.store.load_data({name: tensor.data for name, tensor in store.items()})
    return net


def _cmd_train(args):
    tcfg, mcfg = load_run_config(args.config)
    result = train(tcfg, mcfg)
    for line in result.log_lines:
        print(line)
    print(f"best_val_rmse_cm\t{result.best_rmse_cm!r}\tstep\t{result.best_step}")
    print(f"bicubic_rmse_cm\t{result.baseline_rmse_cm!r}")
    print(f"checkpoint\t{tcfg.checkpoint}")
    return 0


def _cmd_infer(args):
    net = load_network(args.ckpt)
    rgb = read_image(args.rgb)
    depth_lr = read_image(args.lr)
    if depth_lr.data.shape[1] != 1:
        raise UsageError("--lr must be a single-channel depth PGM")
    if rgb.data.shape[1] != 3:
        raise UsageError("--rgb must be a three-channel PPM")
    with no_grad():
        pred, _ = net(rgb, depth_lr)
    z_min, z_max = read_depth_range(args.lr)
    clipped = Tensor(np.clip(pred.data, z_min, z_max))
    write_image(clipped, args.out, bits=16, depth_range=(z_min, z_max))
    print(f"wrote {args.out} ({pred.data.shape[-2]}x{pred.data.shape[-1]})")
    return 0


def _load_pool_spec(path, scale):
    values = parse_config(path)
    unknown = set(values) - _POOL_KEYS
    if unknown:
        raise UsageError(f"unknown scene keys: {sorted(unknown)}")
    count = values.pop("scenes", 16)
    seed = values.pop("seed", 0)
    return [synth_scene(SceneSpec(
        height=values.get("hr_size", 64), width=values.get("hr_size", 64),
        scale=scale, num_primitives=values.get("num_primitives", 4),
        z_min=values.get("z_min", 0.5), z_max=values.get("z_max", 5.0),
        seed=seed + i)) for i in range(count)]


def _cmd_eval(args):
    net = load_network(args.ckpt)
    pool = _load_pool_spec(args.scenes, net.config.scale)
    result = evaluate(net, pool)
    print("sample\trmse_cm\tbicubic_rmse_cm")
    for idx, model_rmse, base_rmse in result.table:
        print(f"{idx}\t{model_rmse!r}\t{base_rmse!r}")
    print(f"mean\t{result.mean_rmse_cm!r}\t{result.baseline_rmse_cm!r}")
    return 0


def _cmd_degrade(args):
    if args.scale < 1:
        raise UsageError("--scale must be a positive integer")
    depth = read_image(args.inp)
    z_range = read_depth_range(args.inp)
    write_image(degrade(depth, args.scale), args.out, bits=args.bits, depth_range=z_range)
    return 0


def _cmd_spectra_dump(args):
    net = load_network(args.ckpt)
    rgb = read_image(args.rgb)
    depth_lr = read_image(args.lr)
    os.makedirs(args.out_dir, exist_ok=True)
    captures = []
    with no_grad():
        depth_up = T.bicubic_resize(depth_lr, net.config.scale)
        enhanced, _ = net.calibrator(rgb, depth_up)
        rgb_feat, depth_feat = net.refiner.encode(rgb, depth_lr)
        for index, block in enumerate(net.refiner.blocks):
            _, depth_polar, rgb_polar = block.spectra(rgb_feat, depth_feat, enhanced)
            captures.append((index, {
                "amp_depth": depth_polar.amplitude.data,
                "amp_rgb": rgb_polar.amplitude.data,
                "amp_diff": np.abs(rgb_polar.amplitude.data - depth_polar.amplitude.data),
            }))
            rgb_feat, depth_feat = block(rgb_feat, depth_feat, enhanced)
    written = []
    for index, maps in captures:
        for label, amp in maps.items():
            # channel-mean, log scale, DC centered for inspection
            img = np.fft.fftshift(np.log1p(amp.mean(axis=1)[0]))
            top = float(img.max()) if img.max() > 0 else 1.0
            path = os.path.join(args.out_dir, f"sdb{index:02d}_{label}.pgm")
            write_image(Tensor(img[None, None]), path, bits=8, depth_range=(0.0, top))
            written.append(path)
    for path in written:
        print(path)
    return 0


def _cmd_gradcheck(args):
    values = parse_config(args.config)
    unknown = set(values) - _MODEL_KEYS
    if unknown:
        raise UsageError(f"unknown config keys for gradcheck: {sorted(unknown)}")
    config = _apply(ModelConfig, values, rename={"model_seed": "seed"})
    instance = build_instance(config)
    report = run_check(instance)
    print(f"instance_seed\t{report.instance_seed}")
    print(f"checked\t{report.checked}")
    print(f"worst_relative_error\t{report.worst_rel!r}")
    if report.passed:
        print("gradcheck\tPASS")
        return 0
    for name, index, analytic, numeric, err in report.failures[:20]:
        print(f"FAIL\t{name}[{index}]\tanalytic={analytic!r}\tnumeric={numeric!r}\terr={err!r}")
    print("gradcheck\tFAIL")
    return 2


def build_parser():
    parser = _Parser(prog="depthsr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on synthetic scenes")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="super-resolve one depth map")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--rgb", required=True)
    p.add_argument("--lr", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a scene pool")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--scenes", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("degrade", help="bicubic down-sample a depth PGM")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bits", type=int, default=16, choices=(8, 16))
    p.set_defaults(func=_cmd_degrade)

    p = sub.add_parser("spectra-dump", help="write per-block amplitude maps")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--rgb", required=True)
    p.add_argument("--lr", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_spectra_dump)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def cli(argv):
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
