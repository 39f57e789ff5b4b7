"""Named, ordered collections of learnable tensors."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class ParamStore:
    """Registry of learnable tensors keyed by unique names.

    Iteration is always in lexicographic name order, which fixes the
    checkpoint layout and the optimizer update order.
    """

    def __init__(self):
        self._params = {}

    def add(self, name, tensor):
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        tensor.requires_grad = True
        self._params[name] = tensor
        return tensor

    def names(self):
        return sorted(self._params)

    def items(self):
        return [(n, self._params[n]) for n in self.names()]

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def total_parameters(self):
        return sum(p.data.size for p in self._params.values())

    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def copy_data(self):
        """Snapshot of all parameter arrays, keyed by name."""
        return {n: p.data.copy() for n, p in self._params.items()}

    def load_data(self, arrays):
        """Overwrite parameter values in place from a name->array map."""
        for name, tensor in self._params.items():
            arr = arrays.get(name)
            if arr is None:
                raise ValueError(f"missing parameter {name!r}")
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != tensor.data.shape:
                raise ValueError(
                    f"parameter {name!r}: shape {arr.shape} != {tensor.data.shape}")
            tensor.data = arr.copy()
        extra = set(arrays) - set(self._params)
        if extra:
            raise ValueError(f"unknown parameters: {sorted(extra)}")
