"""Parameter containers and dense layers."""

from __future__ import annotations

from collections.abc import Iterator, Sequence
import math

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, silu


class ParamSet:
    """Ordered name -> Tensor mapping of trainable parameters."""

    def __init__(self, params: dict[str, Tensor] | None = None):
        self._params: dict[str, Tensor] = dict(params or {})

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __setitem__(self, name: str, value: Tensor):
        self._params[name] = value

    def __delitem__(self, name: str):
        del self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def num_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def state(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray], strict: bool = True):
        for name, value in state.items():
            if name not in self._params:
                if strict:
                    raise KeyError(f"unexpected parameter {name!r}")
                continue
            t = self._params[name]
            value = np.asarray(value, dtype=np.float64)
            if value.shape != t.shape:
                raise ShapeError(f"{name}: checkpoint shape {value.shape} vs parameter {t.shape}")
            t.data = value.copy()
        if strict:
            missing = [k for k in self._params if k not in state]
            if missing:
                raise KeyError(f"missing parameters: {missing}")

    def subset(self, prefixes: Sequence[str]) -> ParamSet:
        return ParamSet({k: t for k, t in self._params.items() if k.startswith(tuple(prefixes))})


def kaiming_uniform(rng: np.random.Generator, fan_in: int, shape, gain: float = 1.0) -> np.ndarray:
    """Uniform init with variance ``gain**2 / fan_in``."""
    bound = gain * math.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    def __init__(self, params: ParamSet, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator, bias: bool = True, zero: bool = False):
        self.n_in, self.n_out = n_in, n_out
        w = np.zeros((n_in, n_out)) if zero else kaiming_uniform(rng, n_in, (n_in, n_out))
        self.weight = params[f"{name}.weight"] = Tensor(w, requires_grad=True, name=f"{name}.weight")
        self.bias = None
        if bias:
            self.bias = params[f"{name}.bias"] = Tensor(np.zeros(n_out), requires_grad=True, name=f"{name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"linear layer expects {self.n_in} inputs, got shape {x.shape}")
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class MLP:
    """Linear layers with SiLU between them (none after the last)."""

    def __init__(self, params: ParamSet, name: str, sizes: Sequence[int], rng: np.random.Generator,
                 final_activation: bool = False, zero_last: bool = False, last_bias: bool = True):
        self.layers = []
        for k in range(len(sizes) - 1):
            last = k == len(sizes) - 2
            self.layers.append(Linear(params, f"{name}.{k}", sizes[k], sizes[k + 1], rng,
                                      bias=last_bias or not last, zero=zero_last and last))
        self.final_activation = final_activation

    def __call__(self, x: Tensor) -> Tensor:
        for k, layer in enumerate(self.layers):
            x = layer(x)
            if k < len(self.layers) - 1 or self.final_activation:
                x = silu(x)
        return x
