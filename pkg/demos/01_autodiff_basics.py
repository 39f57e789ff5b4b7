"""Tour of the tensor engine: ops, broadcasting rules, and backprop.

Builds a small computation, runs the backward pass, and cross-checks a
few gradients against central finite differences.
"""

import numpy as np

import depthsr as D
from depthsr.tensor import Tensor

rng = np.random.default_rng(7)

print("== forward ops on (N, C, H, W) tensors ==")
x = Tensor(rng.standard_normal((1, 2, 4, 4)), requires_grad=True)
w = Tensor(rng.uniform(-0.5, 0.5, (3, 2, 3, 3)), requires_grad=True)
b = Tensor(np.zeros(3), requires_grad=True)

conv = D.conv2d(x, w, b, stride=1, padding=1)
act = D.leaky_relu(conv, 0.2)
pooled = D.global_pool(act, "mean")
print(f"conv {conv.shape} -> leaky_relu -> mean pool {pooled.shape}")

target = Tensor(np.full((1, 3, 4, 4), 0.25))
loss = D.reduce_mean_abs(act, target)
print(f"L1 loss against a constant target: {loss.item():.6f}")

print("\n== backward populates grad on every tensor that requires it ==")
D.backward(loss)
for name, t in (("x", x), ("w", w), ("b", b)):
    print(f"grad({name}): shape {t.grad.shape}, mean |g| = {np.abs(t.grad).mean():.2e}")

print("\n== spot check against central differences ==")
flat = w.data.reshape(-1)
gflat = w.grad.reshape(-1)
step = 1e-6
for idx in rng.choice(flat.size, size=3, replace=False):
    saved = flat[idx]

    def value():
        out = D.leaky_relu(D.conv2d(x, w, b, stride=1, padding=1), 0.2)
        return D.reduce_mean_abs(out, target).item()

    flat[idx] = saved + step
    hi = value()
    flat[idx] = saved - step
    lo = value()
    flat[idx] = saved
    numeric = (hi - lo) / (2 * step)
    print(f"w[{idx}]: autodiff {gflat[idx]: .8f}  finite-difference {numeric: .8f}")

print("\n== gradients accumulate across uses and across backward calls ==")
t = Tensor(np.full((1, 1, 2, 2), 2.0), requires_grad=True)
double_use = D.add(D.mul(t, t), D.mul(t, t))
loss2 = D.reduce_mean_abs(double_use, Tensor(np.zeros((1, 1, 2, 2))))
D.backward(loss2)
print(f"two consumers of t: grad = {t.grad.reshape(-1)}  (2 * 2t / 4 each)")
D.backward(loss2)
print(f"second backward accumulates: grad = {t.grad.reshape(-1)}")
