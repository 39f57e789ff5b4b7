"""Scenes, degradation, netpbm files, and the checkpoint format."""

import struct

import numpy as np
import pytest

import depthsr as D
from depthsr.data import (CHECKPOINT_MAGIC, read_depth_range, read_image,
                          write_image)
from depthsr.gradient import gradient_map
from depthsr.params import ParamStore
from depthsr.tensor import Tensor


class TestScenes:
    def test_zero_primitives_constant_depth(self):
        spec = D.SceneSpec(height=32, width=32, scale=4, num_primitives=0,
                           distractors=0, rgb_noise=0.0, seed=3)
        sample = D.synth_scene(spec)
        depth = sample.depth_hr.data
        assert np.all(depth == depth.reshape(-1)[0])
        assert np.all(gradient_map(sample.depth_hr).data == 0.0)

    def test_centered_rectangle_border_ring(self):
        spec = D.SceneSpec(height=32, width=32, scale=4, num_primitives=0,
                           distractors=0, rgb_noise=0.0, seed=0,
                           primitives=(("rect", 12, 20, 12, 20, 3.0),))
        sample = D.synth_scene(spec)
        grad = gradient_map(sample.depth_hr).data[0, 0]
        # nonzero exactly where a central difference crosses the boundary
        want = np.zeros((32, 32), dtype=bool)
        for y in range(32):
            for x in range(32):
                inside = lambda yy, xx: 12 <= yy < 20 and 12 <= xx < 20
                neighbors = [(min(y + 1, 31), x), (max(y - 1, 0), x),
                             (y, min(x + 1, 31)), (y, max(x - 1, 0))]
                if any(inside(*n) != inside(y, x) for n in neighbors):
                    want[y, x] = True
        assert np.array_equal(grad != 0.0, want)

    def test_determinism(self):
        spec = D.SceneSpec(seed=11)
        a = D.synth_scene(spec)
        b = D.synth_scene(spec)
        assert np.array_equal(a.rgb.data, b.rgb.data)
        assert np.array_equal(a.depth_hr.data, b.depth_hr.data)
        assert np.array_equal(a.depth_lr.data, b.depth_lr.data)

    def test_depth_sample_invariant(self):
        sample = D.synth_scene(D.SceneSpec(seed=4))
        redo = D.degrade(sample.depth_hr, sample.scale)
        assert np.array_equal(redo.data, sample.depth_lr.data)
        assert np.all(sample.depth_hr.data > 0)
        assert np.all(sample.rgb.data >= 0) and np.all(sample.rgb.data <= 1)

    def test_extent_validation(self):
        with pytest.raises(ValueError):
            D.SceneSpec(height=30, width=32, scale=4).validate()
        with pytest.raises(ValueError):
            D.SceneSpec(z_min=0.0).validate()


class TestDegrade:
    def test_constant_depth(self):
        t = Tensor(np.full((1, 1, 16, 16), 1.75))
        for s in (1, 2, 4):
            out = D.degrade(t, s)
            assert np.max(np.abs(out.data - 1.75)) < 1e-12

    def test_scale_one_identity(self):
        t = Tensor(np.random.default_rng(5).uniform(0.5, 2, (1, 1, 8, 8)))
        assert np.array_equal(D.degrade(t, 1).data, t.data)

    def test_matches_bicubic(self):
        t = Tensor(np.random.default_rng(6).uniform(0.5, 2, (1, 1, 16, 16)))
        got = D.degrade(t, 4)
        want = D.bicubic_resize(t, 0.25)
        assert np.array_equal(got.data, want.data)

    def test_nondivisible_rejected(self):
        with pytest.raises(ValueError):
            D.degrade(Tensor(np.zeros((1, 1, 10, 10))), 4)


class TestNetpbm:
    def test_16bit_endpoint_mapping(self, tmp_path):
        path = tmp_path / "d.pgm"
        payload = struct.pack(">4H", 0, 1, 32768, 65535)
        blob = b"P5\n#depth_range 0.0 10.0\n4 1\n65535\n" + payload
        path.write_bytes(blob)
        t = read_image(path)
        assert t.data.shape == (1, 1, 1, 4)
        assert t.data[0, 0, 0, 0] == 0.0
        assert abs(t.data[0, 0, 0, 3] - 10.0) < 1e-12
        assert abs(t.data[0, 0, 0, 1] - 10.0 / 65535) < 1e-12

    def test_depth_round_trip_quantization_bound(self, tmp_path):
        rng = np.random.default_rng(7)
        depth = Tensor(rng.uniform(0.5, 5.0, (1, 1, 8, 8)))
        path = tmp_path / "d.pgm"
        write_image(depth, path, bits=16, depth_range=(0.5, 5.0))
        back = read_image(path)
        assert np.max(np.abs(back.data - depth.data)) <= (5.0 - 0.5) / 65535

    def test_rgb_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        rgb = Tensor(rng.uniform(0, 1, (1, 3, 6, 5)))
        path = tmp_path / "c.ppm"
        write_image(rgb, path)
        back = read_image(path)
        assert back.data.shape == (1, 3, 6, 5)
        assert np.max(np.abs(back.data - rgb.data)) <= 1.0 / 255 + 1e-12

    def test_write_then_read_depth_range(self, tmp_path):
        path = tmp_path / "d.pgm"
        write_image(Tensor(np.full((1, 1, 2, 2), 1.0)), path, depth_range=(0.25, 4.5))
        assert read_depth_range(path) == (0.25, 4.5)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P5\n#depth_range 0.0 1.0\n4 4\n65535\n\x00\x01")
        with pytest.raises(ValueError, match="truncated"):
            read_image(path)

    def test_missing_depth_range_rejected(self, tmp_path):
        path = tmp_path / "plain.pgm"
        path.write_bytes(b"P5\n2 1\n255\n\x00\xff")
        with pytest.raises(ValueError, match="depth_range"):
            read_image(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P7\n2 1\n255\n\x00\xff")
        with pytest.raises(ValueError, match="magic"):
            read_image(path)

    def test_8bit_depth_supported(self, tmp_path):
        path = tmp_path / "d8.pgm"
        write_image(Tensor(np.full((1, 1, 2, 2), 3.0)), path, bits=8,
                    depth_range=(0.0, 4.0))
        back = read_image(path)
        assert np.max(np.abs(back.data - 3.0)) <= 4.0 / 255


class TestCheckpoint:
    def fresh_store(self):
        store = ParamStore()
        rng = np.random.default_rng(9)
        store.add("alpha.weight", Tensor(rng.standard_normal((2, 1, 3, 3))))
        store.add("beta.bias", Tensor(rng.standard_normal(2)))
        return store

    def test_save_load_save_byte_identical(self, tmp_path):
        store = self.fresh_store()
        cfg = D.ModelConfig()
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        D.save_checkpoint(store, cfg, p1)
        loaded, cfg2 = D.load_checkpoint(p1)
        D.save_checkpoint(loaded, cfg2, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert cfg2 == cfg

    def test_round_trip_values(self, tmp_path):
        store = self.fresh_store()
        path = tmp_path / "a.ckpt"
        D.save_checkpoint(store, D.ModelConfig(channels=16, scale=8), path)
        loaded, cfg = D.load_checkpoint(path)
        assert cfg.channels == 16 and cfg.scale == 8
        for (n1, p1), (n2, p2) in zip(store.items(), loaded.items()):
            assert n1 == n2 and np.array_equal(p1.data, p2.data)

    def test_truncated_rejected(self, tmp_path):
        store = self.fresh_store()
        path = tmp_path / "a.ckpt"
        D.save_checkpoint(store, D.ModelConfig(), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(ValueError, match="mismatch"):
            D.load_checkpoint(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "a.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 80)
        with pytest.raises(ValueError, match="magic"):
            D.load_checkpoint(path)

    def test_single_parameter_byte_audit(self, tmp_path):
        store = ParamStore()
        store.add("w", Tensor(np.ones((2, 2))))
        path = tmp_path / "tiny.ckpt"
        D.save_checkpoint(store, D.ModelConfig(), path)
        config_bytes = 3 * 4 + 4 * 8 + 2 * 4 + 8
        want = 4 + 4 + config_bytes + 4 + len(b"w") + 4 + 2 * 4 + 4 * 8
        assert path.stat().st_size == want
        assert path.read_bytes()[:4] == CHECKPOINT_MAGIC

    def test_duplicate_name_rejected(self):
        store = ParamStore()
        store.add("w", Tensor(np.ones(2)))
        with pytest.raises(ValueError, match="duplicate"):
            store.add("w", Tensor(np.ones(2)))

    def test_lexicographic_order_on_disk(self, tmp_path):
        store = ParamStore()
        store.add("zeta", Tensor(np.ones(1)))
        store.add("alpha", Tensor(np.ones(1)))
        path = tmp_path / "o.ckpt"
        D.save_checkpoint(store, D.ModelConfig(), path)
        blob = path.read_bytes()
        assert blob.find(b"alpha") < blob.find(b"zeta")
