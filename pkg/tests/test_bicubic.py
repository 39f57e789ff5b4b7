"""Bicubic resampling against a direct kernel-evaluation oracle."""

import numpy as np
import pytest

import depthsr as D
from depthsr.tensor import Tensor


def cubic_weight(t, a=-0.5):
    t = abs(t)
    if t <= 1.0:
        return (a + 2) * t**3 - (a + 3) * t**2 + 1
    if t < 2.0:
        return a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
    return 0.0


def resize_reference(img, factor):
    """Per-output-pixel weight sum with half-pixel centers and edge clamp."""
    h, w = img.shape
    hout, wout = int(round(h * factor)), int(round(w * factor))
    out = np.zeros((hout, wout))
    for yo in range(hout):
        sy = (yo + 0.5) / factor - 0.5
        for xo in range(wout):
            sx = (xo + 0.5) / factor - 0.5
            acc = 0.0
            for ty in range(int(np.floor(sy)) - 1, int(np.floor(sy)) + 3):
                wy = cubic_weight(sy - ty)
                if wy == 0.0:
                    continue
                for tx in range(int(np.floor(sx)) - 1, int(np.floor(sx)) + 3):
                    wx = cubic_weight(sx - tx)
                    if wx == 0.0:
                        continue
                    acc += wy * wx * img[min(max(ty, 0), h - 1), min(max(tx, 0), w - 1)]
            out[yo, xo] = acc
    return out


@pytest.mark.parametrize("factor", [0.25, 0.5, 2, 4])
def test_constant_image_preserved(factor):
    t = Tensor(np.full((1, 1, 8, 8), 3.25))
    out = D.bicubic_resize(t, factor)
    assert np.max(np.abs(out.data - 3.25)) < 1e-12


def test_factor_one_is_identity():
    rng = np.random.default_rng(0)
    t = Tensor(rng.standard_normal((1, 2, 5, 5)))
    assert np.array_equal(D.bicubic_resize(t, 1).data, t.data)


@pytest.mark.parametrize("factor", [0.5, 2])
def test_matches_kernel_oracle(factor):
    rng = np.random.default_rng(1)
    img = rng.standard_normal((6, 8))
    got = D.bicubic_resize(Tensor(img[None, None]), factor).data[0, 0]
    want = resize_reference(img, factor)
    assert np.max(np.abs(got - want)) < 1e-12


def test_upscale_preserves_ramp_interior():
    xs = np.arange(8, dtype=float)
    img = np.tile(xs, (8, 1))
    up = D.bicubic_resize(Tensor(img[None, None]), 2).data[0, 0]
    # interior of a x2 upscale of the ramp Z(x, y) = x is itself a ramp
    expect = (np.arange(16) + 0.5) / 2 - 0.5
    interior = slice(4, -4)
    assert np.max(np.abs(up[4:-4, interior] - expect[interior])) < 1e-9


def test_non_integral_extent_rejected():
    t = Tensor(np.zeros((1, 1, 6, 6)))
    with pytest.raises(ValueError):
        D.bicubic_resize(t, 1 / 4)


def test_adjoint_identity():
    # <R x, y> == <x, R^T y> pins the backward rule to the forward map
    rng = np.random.default_rng(2)
    x = Tensor(rng.standard_normal((1, 1, 8, 8)), requires_grad=True)
    out = D.bicubic_resize(x, 2)
    y = rng.standard_normal(out.data.shape)
    (gx,) = out._vjp(y)
    lhs = float((out.data * y).sum())
    rhs = float((x.data * gx).sum())
    assert abs(lhs - rhs) < 1e-9


def test_rows_form_partition_of_unity():
    from depthsr.tensor import _resize_matrix
    for n_in, n_out in ((8, 16), (16, 8), (8, 32), (32, 8)):
        mat = _resize_matrix(n_in, n_out)
        assert np.max(np.abs(mat.sum(axis=1) - 1.0)) < 1e-12
