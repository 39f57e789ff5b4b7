"""Synthetic depth scenes, bicubic degradation, image files, checkpoints.

Scenes are piecewise-smooth depth maps with sharp occlusion boundaries
plus an RGB image whose edges coincide with the depth edges, with extra
texture-only edges as distractors.  Depth travels in binary PGM (P5,
16-bit by default, value range declared by a `#depth_range z_min z_max`
header comment); RGB travels in binary PPM (P6, 8-bit).  Checkpoints are
a little-endian binary format: magic "SGNR", format version, the model
config, then every parameter in lexicographic name order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .model import ModelConfig
from .params import ParamStore
from .tensor import Tensor, bicubic_resize

CHECKPOINT_MAGIC = b"SGNR"
CHECKPOINT_VERSION = 1
_CONFIG_STRUCT = struct.Struct("<IIIddddIIQ")


# ---------------------------------------------------------------------------
# scenes


@dataclass
class SceneSpec:
    """Deterministic recipe for one synthetic RGB-D scene."""

    height: int = 64
    width: int = 64
    scale: int = 4
    num_primitives: int = 4
    z_min: float = 0.5
    z_max: float = 5.0
    rgb_noise: float = 0.02
    distractors: int = 2
    seed: int = 0
    # explicit primitive list overrides the random draw; entries are
    # ("rect", y0, y1, x0, x1, z), ("circle", cy, cx, r, z) or
    # ("ramp", y0, y1, x0, x1, z_from, z_to)
    primitives: tuple = None

    def validate(self):
        if self.height % self.scale or self.width % self.scale:
            raise ValueError(
                f"extents {self.height}x{self.width} not divisible by scale {self.scale}")
        if not (0.0 < self.z_min < self.z_max):
            raise ValueError("need 0 < z_min < z_max")
        return self


@dataclass
class DepthSample:
    """One training/eval triple; depths in meters, RGB in [0, 1]."""

    rgb: Tensor
    depth_hr: Tensor
    depth_lr: Tensor
    scale: int
    seed: int = 0


def degrade(depth_hr, scale):
    """Low-resolution depth by bicubic down-sampling of the ground truth."""
    h, w = depth_hr.data.shape[-2:]
    if h % scale or w % scale:
        raise ValueError(f"extents {h}x{w} not divisible by scale {scale}")
    return bicubic_resize(depth_hr, 1.0 / scale)


def _depth_color(z, z_min, z_max):
    """Fixed colormap tying each surface's color to its depth.

    Guided recovery needs RGB structure that is informative about depth;
    an invertible color rule gives the guide its full strength at desk
    scale while keeping every depth edge visible in the RGB image.
    """
    t = (z - z_min) / max(z_max - z_min, 1e-9)
    return np.array([t, 1.0 - t, 0.25 + 0.5 * t])


def _random_primitives(spec, rng):
    prims = []
    for _ in range(spec.num_primitives):
        kind = int(rng.integers(0, 3))
        z = float(rng.uniform(spec.z_min, spec.z_max))
        if kind == 0:
            h = int(rng.integers(spec.height // 6, spec.height // 2))
            w = int(rng.integers(spec.width // 6, spec.width // 2))
            y0 = int(rng.integers(0, spec.height - h))
            x0 = int(rng.integers(0, spec.width - w))
            prims.append(("rect", y0, y0 + h, x0, x0 + w, z))
        elif kind == 1:
            r = int(rng.integers(spec.height // 8, spec.height // 3))
            cy = int(rng.integers(r, spec.height - r))
            cx = int(rng.integers(r, spec.width - r))
            prims.append(("circle", cy, cx, r, z))
        else:
            h = int(rng.integers(spec.height // 4, spec.height // 2))
            w = int(rng.integers(spec.width // 4, spec.width // 2))
            y0 = int(rng.integers(0, spec.height - h))
            x0 = int(rng.integers(0, spec.width - w))
            z2 = float(rng.uniform(spec.z_min, spec.z_max))
            prims.append(("ramp", y0, y0 + h, x0, x0 + w, z, z2))
    return prims


def synth_scene(spec):
    """Render a SceneSpec into a DepthSample (pure function of the spec)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    hh, ww = spec.height, spec.width
    z_bg = float(rng.uniform(spec.z_min, spec.z_max))
    depth = np.full((hh, ww), z_bg)
    rgb = np.empty((3, hh, ww))
    rgb[:] = _depth_color(z_bg, spec.z_min, spec.z_max)[:, None, None]

    prims = spec.primitives if spec.primitives is not None else _random_primitives(spec, rng)
    ys, xs = np.mgrid[0:hh, 0:ww]
    for prim in prims:
        if prim[0] == "rect":
            _, y0, y1, x0, x1, z = prim
            mask = (ys >= y0) & (ys < y1) & (xs >= x0) & (xs < x1)
            depth[mask] = z
            color = _depth_color(z, spec.z_min, spec.z_max)
        elif prim[0] == "circle":
            _, cy, cx, r, z = prim
            mask = (ys - cy) ** 2 + (xs - cx) ** 2 <= r * r
            depth[mask] = z
            color = _depth_color(z, spec.z_min, spec.z_max)
        elif prim[0] == "ramp":
            _, y0, y1, x0, x1, z0, z1 = prim
            mask = (ys >= y0) & (ys < y1) & (xs >= x0) & (xs < x1)
            t = (xs - x0) / max(x1 - x0 - 1, 1)
            depth[mask] = (z0 + (z1 - z0) * t)[mask]
            color = _depth_color(0.5 * (z0 + z1), spec.z_min, spec.z_max)
        else:
            raise ValueError(f"unknown primitive {prim[0]!r}")
        for c in range(3):
            rgb[c][mask] = color[c]

    # texture-only edges: color stripes with no depth counterpart
    for _ in range(spec.distractors):
        y0 = int(rng.integers(0, hh - 2))
        x0 = int(rng.integers(0, ww - 2))
        h = int(rng.integers(1, max(hh // 8, 2)))
        w = int(rng.integers(ww // 4, ww))
        shade = rng.uniform(-0.35, 0.35, size=3)
        ysl = slice(y0, min(y0 + h, hh))
        xsl = slice(x0, min(x0 + w, ww))
        rgb[:, ysl, xsl] = np.clip(rgb[:, ysl, xsl] + shade[:, None, None], 0.0, 1.0)

    if spec.rgb_noise:
        rgb = rgb + spec.rgb_noise * rng.standard_normal(rgb.shape)
    rgb = np.clip(rgb, 0.0, 1.0)
    depth = np.clip(depth, spec.z_min, spec.z_max)

    depth_hr = Tensor(depth[None, None])
    return DepthSample(
        rgb=Tensor(rgb[None]),
        depth_hr=depth_hr,
        depth_lr=degrade(depth_hr, spec.scale),
        scale=spec.scale,
        seed=spec.seed,
    )


# ---------------------------------------------------------------------------
# netpbm images


def _split_header(blob, path):
    """Tokenize a netpbm header; returns (tokens, comments, payload offset)."""
    tokens, comments = [], []
    i, n = 0, len(blob)
    while len(tokens) < 4:
        while i < n and blob[i:i + 1].isspace():
            i += 1
        if i >= n:
            raise ValueError(f"{path}: truncated header")
        if blob[i:i + 1] == b"#":
            j = blob.find(b"\n", i)
            j = n if j < 0 else j
            comments.append(blob[i + 1:j].decode("ascii", "replace").strip())
            i = j + 1
            continue
        j = i
        while j < n and not blob[j:j + 1].isspace():
            j += 1
        tokens.append(blob[i:j].decode("ascii"))
        i = j
    return tokens, comments, i + 1  # one whitespace byte separates header and payload


def _depth_range_from(comments, path):
    for line in comments:
        parts = line.split()
        if parts and parts[0] == "depth_range" and len(parts) == 3:
            return float(parts[1]), float(parts[2])
    raise ValueError(f"{path}: depth read needs a '#depth_range z_min z_max' comment")


def read_image(path):
    """Read a P5 depth map (meters) or a P6 RGB image (values in [0, 1]).

    Depth files must declare their range; 16-bit payloads are
    most-significant-byte-first per the PGM convention.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    magic = blob[:2]
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported magic {magic!r}")
    tokens, comments, offset = _split_header(blob, path)
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    channels = 1 if magic == b"P5" else 3
    if maxval == 255:
        dtype, step = np.uint8, 1
    elif maxval == 65535:
        dtype, step = ">u2", 2
    else:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    expected = width * height * channels * step
    payload = blob[offset:offset + expected]
    if len(payload) < expected:
        raise ValueError(f"{path}: truncated payload "
                         f"({len(payload)} of {expected} bytes)")
    raw = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if magic == b"P5":
        z_min, z_max = _depth_range_from(comments, path)
        depth = z_min + raw / maxval * (z_max - z_min)
        return Tensor(depth.reshape(1, 1, height, width))
    rgb = raw.reshape(height, width, 3).transpose(2, 0, 1) / maxval
    return Tensor(rgb[None])


def write_image(t, path, bits=16, depth_range=None):
    """Write a 1-channel tensor as P5 (with depth range) or 3-channel as P6."""
    arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    if arr.ndim != 4 or arr.shape[0] != 1 or arr.shape[1] not in (1, 3):
        raise ValueError(f"write_image: expected (1,1,H,W) or (1,3,H,W), got {arr.shape}")
    _, c, h, w = arr.shape
    if c == 3:
        quant = np.clip(np.round(arr[0] * 255.0), 0, 255).astype(np.uint8)
        header = f"P6\n{w} {h}\n255\n".encode("ascii")
        payload = quant.transpose(1, 2, 0).tobytes()
    else:
        if bits not in (8, 16):
            raise ValueError("write_image: depth bits must be 8 or 16")
        if depth_range is None:
            depth_range = (float(arr.min()), float(arr.max()))
        z_min, z_max = float(depth_range[0]), float(depth_range[1])
        span = z_max - z_min if z_max > z_min else 1.0
        maxval = (1 << bits) - 1
        quant = np.clip(np.round((arr[0, 0] - z_min) / span * maxval), 0, maxval)
        header = (f"P5\n#depth_range {z_min!r} {z_max!r}\n{w} {h}\n{maxval}\n"
                  .encode("ascii"))
        payload = quant.astype(np.uint8 if bits == 8 else ">u2").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def read_depth_range(path):
    """The declared depth range of a P5 file, without loading the payload."""
    with open(path, "rb") as fh:
        blob = fh.read()
    _, comments, _ = _split_header(blob, path)
    return _depth_range_from(comments, path)


# ---------------------------------------------------------------------------
# checkpoints


def _pack_config(config):
    return _CONFIG_STRUCT.pack(
        config.channels, config.sdb_count, config.scale,
        config.lambda_amp, config.lambda_pha, config.gamma_gra, config.gamma_fre,
        config.block_depth, config.attention_ratio, config.seed)


def _unpack_config(blob):
    fields = _CONFIG_STRUCT.unpack(blob)
    return ModelConfig(
        channels=fields[0], sdb_count=fields[1], scale=fields[2],
        lambda_amp=fields[3], lambda_pha=fields[4],
        gamma_gra=fields[5], gamma_fre=fields[6],
        block_depth=fields[7], attention_ratio=fields[8], seed=fields[9])


def save_checkpoint(store, config, path):
    """Serialize parameters (lexicographic order) plus their config."""
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION), _pack_config(config)]
    for name, tensor in store.items():
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(tensor.data, dtype="<f8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path):
    """Read a checkpoint back as (ParamStore, ModelConfig)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    config = _unpack_config(blob[8:8 + _CONFIG_STRUCT.size])
    store = ParamStore()
    pos = 8 + _CONFIG_STRUCT.size
    while pos < len(blob):
        try:
            (name_len,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + name_len].decode("utf-8")
            if len(blob[pos:pos + name_len]) != name_len:
                raise struct.error("short name")
            pos += name_len
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            payload = blob[pos:pos + 8 * count]
            if len(payload) != 8 * count:
                raise struct.error("short payload")
            pos += 8 * count
        except struct.error as exc:
            raise ValueError(f"{path}: payload/extent mismatch ({exc})") from exc
        arr = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
        store.add(name, Tensor(arr))
    return store, config
