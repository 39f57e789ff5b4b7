"""Dense float64 tensors with reverse-mode automatic differentiation.

Network feature maps are 4-D arrays in (batch, channel, height, width)
order; parameters and reduction results may carry any rank.  Every
operation records its inputs and a vector-Jacobian closure on the output
tensor, so `backward` on a scalar loss fills `grad` on each tensor that
requires gradients.  Graph construction is single-threaded per model
instance; tensors are immutable after creation and safe to read from
multiple threads.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

_grad_enabled = True
_kink_trace = None


@contextmanager
def no_grad():
    """Disable graph recording inside the block (forward values only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextmanager
def record_kink_margins():
    """Collect, for every non-smooth op executed inside the block, the
    distance of its inputs to the nearest kink.  Yields a list of
    (kind, margin) pairs, used to vet finite-difference check instances.
    """
    global _kink_trace
    prev = _kink_trace
    _kink_trace = []
    try:
        yield _kink_trace
    finally:
        _kink_trace = prev


def _tracing():
    return _kink_trace is not None


def _note_kink(kind, margin):
    if _kink_trace is not None:
        _kink_trace.append((kind, float(margin)))


class Tensor:
    """A float64 array plus the bookkeeping needed for backprop."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.size:
            # cheap pre-filter: the sum is non-finite if any value is; the
            # exact test then rules out overflow of legitimately finite data
            total = float(arr.sum())
            if (total != total or abs(total) == np.inf) and not np.isfinite(arr).all():
                raise ValueError("tensor holds non-finite values")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        """Value of a single-element tensor as a Python float."""
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def detach(self):
        """Same values, cut loose from the graph."""
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # convenience operators; shapes must match exactly
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def abs(self):
        return absolute(self)


def _result(data, parents, vjp):
    """Wrap an op result, recording the graph edge only when needed."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _check_same_shape(a, b, op):
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


# ---------------------------------------------------------------------------
# elementwise suite


def add(a, b):
    _check_same_shape(a, b, "add")
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    _check_same_shape(a, b, "sub")
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    _check_same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return _result(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def scale(a, c):
    """Multiply by a Python constant."""
    c = float(c)
    return _result(a.data * c, (a,), lambda g: (g * c,))


def _nonzero_min(values):
    # exact zeros are FD-safe for |x| (a symmetric difference around an exact
    # kink matches the subgradient 0); only near-zeros are hazardous
    live = values[values > 0.0]
    return live.min() if live.size else np.inf


def absolute(a):
    """|a| elementwise; subgradient 0 at the kink."""
    ad = a.data
    if _kink_trace is not None and ad.size:
        _note_kink("abs", _nonzero_min(np.abs(ad)))
    return _result(np.abs(ad), (a,), lambda g: (g * np.sign(ad),))


def leaky_relu(a, slope=0.2):
    """max(x, slope*x); derivative at 0 defined as the slope."""
    ad = a.data
    if _kink_trace is not None and ad.size:
        _note_kink("leaky_relu", np.abs(ad).min())
    out = np.where(ad > 0.0, ad, slope * ad)
    return _result(out, (a,), lambda g: (g * np.where(ad > 0.0, 1.0, slope),))


def sigmoid(a):
    ad = a.data
    # split by sign so exp never overflows
    out = np.where(ad >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(ad))),
                   np.exp(-np.abs(ad)) / (1.0 + np.exp(-np.abs(ad))))
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),))


def exp(a):
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,))


def tanh(a):
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),))


def cos(a):
    ad = a.data
    return _result(np.cos(ad), (a,), lambda g: (-g * np.sin(ad),))


def sin(a):
    ad = a.data
    return _result(np.sin(ad), (a,), lambda g: (g * np.cos(ad),))


# ---------------------------------------------------------------------------
# shape ops


def concat(parts, axis=1):
    """Concatenate along the channel axis; all other extents must agree."""
    if not parts:
        raise ValueError("concat: empty part list")
    first = parts[0].data.shape
    for p in parts:
        s = p.data.shape
        if len(s) != len(first) or s[:axis] != first[:axis] or s[axis + 1:] != first[axis + 1:]:
            raise ValueError(f"concat: incompatible shapes {first} vs {s}")
    out = np.concatenate([p.data for p in parts], axis=axis)
    splits = np.cumsum([p.data.shape[axis] for p in parts])[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(out, tuple(parts), vjp)


def slice_channels(a, start, stop):
    """View of channels [start, stop) as a new tensor."""
    nchan = a.data.shape[1]
    if not (0 <= start < stop <= nchan):
        raise ValueError(f"slice_channels: bad range [{start},{stop}) for C={nchan}")
    out = a.data[:, start:stop].copy()

    def vjp(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        return (full,)

    return _result(out, (a,), vjp)


def tile_spatial(a, height, width):
    """Broadcast an (N,C,1,1) tensor over a spatial extent."""
    n, c, h, w = a.data.shape
    if (h, w) != (1, 1):
        raise ValueError(f"tile_spatial: expected (N,C,1,1), got {a.data.shape}")
    out = np.broadcast_to(a.data, (n, c, height, width)).copy()
    return _result(out, (a,), lambda g: (g.sum(axis=(2, 3), keepdims=True),))


# ---------------------------------------------------------------------------
# reductions


def reduce_mean_abs(a, b):
    """Mean over every element of |a - b|; returns a scalar tensor."""
    _check_same_shape(a, b, "reduce_mean_abs")
    diff = a.data - b.data
    if _kink_trace is not None and diff.size:
        _note_kink("l1_residual", _nonzero_min(np.abs(diff)))
    out = np.mean(np.abs(diff))
    count = diff.size
    sgn = np.sign(diff)

    def vjp(g):
        gs = float(g) / count
        return (gs * sgn, -gs * sgn)

    return _result(out, (a, b), vjp)


def global_pool(a, mode="mean"):
    """Per-channel spatial pooling to (N,C,1,1).

    Max pooling routes the gradient to the first arg-max position in
    row-major order, so gradients stay deterministic under ties.
    """
    n, c, h, w = a.data.shape
    flat = a.data.reshape(n, c, h * w)
    if mode == "mean":
        out = flat.mean(axis=2).reshape(n, c, 1, 1)
        return _result(out, (a,), lambda g: (np.broadcast_to(g / (h * w), (n, c, h, w)).copy(),))
    if mode == "max":
        idx = flat.argmax(axis=2)
        out = np.take_along_axis(flat, idx[..., None], axis=2).reshape(n, c, 1, 1)
        if _kink_trace is not None and h * w > 1:
            top2 = np.partition(flat, h * w - 2, axis=2)[:, :, -2:]
            _note_kink("max_pool_gap", (top2[:, :, 1] - top2[:, :, 0]).min())

        def vjp(g):
            gx = np.zeros((n, c, h * w))
            np.put_along_axis(gx, idx[..., None], g.reshape(n, c, 1), axis=2)
            return (gx.reshape(n, c, h, w),)

        return _result(out, (a,), vjp)
    raise ValueError(f"global_pool: unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# convolution


def conv2d(x, weight, bias, stride=1, padding=0):
    """2-D cross-correlation (no kernel flip) with bias.

    x: (N,Cin,H,W), weight: (Cout,Cin,kh,kw), bias: (Cout,).  Output
    extents are (H + 2*padding - kh)//stride + 1 and must divide evenly.
    """
    xd, wd, bd = x.data, weight.data, bias.data
    if xd.ndim != 4 or wd.ndim != 4:
        raise ValueError("conv2d: input and weight must be 4-D")
    n, cin, h, w = xd.shape
    cout, cin_w, kh, kw = wd.shape
    if cin_w != cin:
        raise ValueError(f"conv2d: channel mismatch input={cin} weight={cin_w}")
    if bd.shape != (cout,):
        raise ValueError(f"conv2d: bias shape {bd.shape} != ({cout},)")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("conv2d: kernel extents must be odd")
    hp, wp = h + 2 * padding, w + 2 * padding
    if hp < kh or wp < kw:
        raise ValueError("conv2d: padded extents smaller than kernel")
    if (hp - kh) % stride or (wp - kw) % stride:
        raise ValueError("conv2d: non-integer output extent")
    hout = (hp - kh) // stride + 1
    wout = (wp - kw) // stride + 1

    if kh == 1 and kw == 1 and stride == 1 and padding == 0:
        # pointwise convolution is a plain channel mix
        w2d = wd.reshape(cout, cin)
        flat = xd.reshape(n, cin, h * w)
        out = np.matmul(w2d, flat).reshape(n, cout, h, w) + bd.reshape(1, cout, 1, 1)

        def vjp_pointwise(g):
            g2 = g.reshape(n, cout, h * w)
            gw = np.einsum("nop,ncp->oc", g2, flat, optimize=True).reshape(wd.shape)
            gx = np.matmul(w2d.T, g2).reshape(xd.shape)
            return (gx, gw, g2.sum(axis=(0, 2)))

        return _result(out, (x, weight, bias), vjp_pointwise)

    if padding:
        xp = np.zeros((n, cin, hp, wp))
        xp[:, :, padding:padding + h, padding:padding + w] = xd
    else:
        xp = xd
    cols6 = np.empty((n, cin, kh, kw, hout, wout))
    for i in range(kh):
        for j in range(kw):
            cols6[:, :, i, j] = xp[:, :, i:i + stride * hout:stride, j:j + stride * wout:stride]
    cols = cols6.reshape(n, cin * kh * kw, hout * wout)
    w2d = wd.reshape(cout, cin * kh * kw)
    out = np.matmul(w2d, cols).reshape(n, cout, hout, wout) + bd.reshape(1, cout, 1, 1)

    def vjp(g):
        g2 = g.reshape(n, cout, hout * wout)
        gw = np.einsum("nop,nkp->ok", g2, cols, optimize=True).reshape(wd.shape)
        gb = g2.sum(axis=(0, 2))
        gcols = np.matmul(w2d.T, g2).reshape(n, cin, kh, kw, hout, wout)
        gxp = np.zeros((n, cin, hp, wp))
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + stride * hout:stride, j:j + stride * wout:stride] += gcols[:, :, i, j]
        gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        return (gx, gw, gb)

    return _result(out, (x, weight, bias), vjp)


# ---------------------------------------------------------------------------
# bicubic resampling

_CUBIC_A = -0.5
_resize_weight_cache = {}


def _cubic_kernel(t):
    """Catmull-Rom cubic (a = -0.5) evaluated at |t|."""
    t = np.abs(t)
    a = _CUBIC_A
    near = (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    far = a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def _resize_matrix(n_in, n_out):
    """Dense (n_out, n_in) bicubic interpolation matrix.

    Half-pixel center alignment; taps outside the signal clamp to the
    nearest edge sample, keeping each row a partition of unity.
    """
    key = (n_in, n_out)
    cached = _resize_weight_cache.get(key)
    if cached is not None:
        return cached
    mat = np.zeros((n_out, n_in))
    ratio = n_out / n_in
    for i in range(n_out):
        src = (i + 0.5) / ratio - 0.5
        base = math.floor(src)
        for tap in range(base - 1, base + 3):
            wgt = float(_cubic_kernel(src - tap))
            if wgt != 0.0:
                mat[i, min(max(tap, 0), n_in - 1)] += wgt
    _resize_weight_cache[key] = mat
    return mat


def bicubic_resize(t, factor):
    """Resample spatially by a rational factor (2**k or 1/2**k, or 1).

    Fixed linear map, differentiable with respect to the input; both
    output extents must come out integral.
    """
    factor = float(factor)
    n, c, h, w = t.data.shape
    hout, wout = h * factor, w * factor
    if abs(hout - round(hout)) > 1e-9 or abs(wout - round(wout)) > 1e-9:
        raise ValueError(f"bicubic_resize: non-integral output extent for factor {factor}")
    hout, wout = int(round(hout)), int(round(wout))
    if factor == 1.0:
        return _result(t.data.copy(), (t,), lambda g: (g,))
    wr = _resize_matrix(h, hout)
    wc = _resize_matrix(w, wout)
    out = np.matmul(np.matmul(wr, t.data), wc.T)

    def vjp(g):
        return (np.matmul(np.matmul(wr.T, g), wc),)

    return _result(out, (t,), vjp)


# ---------------------------------------------------------------------------
# backward pass


def _topo_order(root):
    """Parents-before-children ordering of the recorded graph."""
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Populate `grad` with d(loss)/d(tensor) for the whole graph.

    The pass accumulates into a scratch map first and adds the result
    onto any existing `grad`, so repeated calls sum contributions.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    order = _topo_order(loss)
    acc = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = acc.get(id(node))
        if g is None or node._vjp is None:
            continue
        for parent, contrib in zip(node._parents, node._vjp(g)):
            if not parent.requires_grad or contrib is None:
                continue
            prev = acc.get(id(parent))
            acc[id(parent)] = contrib if prev is None else prev + contrib
    for node in order:
        g = acc.get(id(node))
        if g is None:
            continue
        node.grad = g.copy() if node.grad is None else node.grad + g
