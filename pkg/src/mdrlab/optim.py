"""Named parameter storage, the Adam optimizer, and a finite-difference oracle."""

from __future__ import annotations

import logging

import numpy as np

from .errors import ConfigError
from .tensor import Tensor

log = logging.getLogger(__name__)


class ParamStore:
    """Named trainable tensors plus the weight-decay exclusion set."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._no_decay: set[str] = set()

    def add(self, name: str, values, decay: bool = True) -> Tensor:
        if name in self._params:
            raise ConfigError(f"duplicate parameter {name!r}")
        tensor = Tensor(values, requires_grad=True, name=name)
        self._params[name] = tensor
        if not decay:
            self._no_decay.add(name)
        return tensor

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name) -> Tensor:
        return self._params[name]

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self):
        return self._params.values()

    def decay_excluded(self, name: str) -> bool:
        return name in self._no_decay

    def excluded_names(self):
        return sorted(self._no_decay)

    def values(self) -> dict:
        return {name: t.data.copy() for name, t in self._params.items()}

    def set_values(self, mapping) -> None:
        for name, values in mapping.items():
            tensor = self._params[name]
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != tensor.data.shape:
                raise ConfigError(
                    f"parameter {name!r}: expected shape {tensor.data.shape}, got {arr.shape}"
                )
            tensor.data = arr.copy()


class Adam:
    """Adam with bias correction and classic additive-L2 weight decay.

    Decay is added to the gradient (not decoupled) and skipped for
    parameters registered with ``decay=False`` in the store.
    """

    def __init__(self, store: ParamStore, lr=1e-3, beta1=0.9, beta2=0.999,
                 eps=1e-8, weight_decay=0.0):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self._warned_missing: set[str] = set()

    def step(self, grads) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.store.items():
            g = grads.get(name)
            if g is None:
                if name not in self._warned_missing:
                    log.warning("no gradient for parameter %r; treating as zero", name)
                    self._warned_missing.add(name)
                g = np.zeros_like(p.data)
            else:
                g = np.asarray(g, dtype=np.float64)
                if g.shape != p.data.shape:
                    raise ConfigError(
                        f"gradient for {name!r}: expected shape {p.data.shape}, got {g.shape}"
                    )
            if self.weight_decay != 0.0 and not self.store.decay_excluded(name):
                g = g + self.weight_decay * p.data
            m = self.m.get(name)
            if m is None:
                m = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
            v = self.v[name]
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            self.m[name] = m
            self.v[name] = v
            p.data = p.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def load_state_dict(self, state) -> None:
        self.t = int(state["t"])
        self.m = {k: np.asarray(v, dtype=np.float64).copy() for k, v in state["m"].items()}
        self.v = {k: np.asarray(v, dtype=np.float64).copy() for k, v in state["v"].items()}
        for name, moment in self.m.items():
            if name in self.store and moment.shape != self.store[name].data.shape:
                raise ConfigError(
                    f"moment for {name!r}: expected shape {self.store[name].data.shape}, "
                    f"got {moment.shape}"
                )


def finite_diff_gradient(f, store: ParamStore, h: float = 1e-5) -> dict:
    """Central differences (f(p+h) - f(p-h)) / 2h, one coordinate at a time.

    ``f`` must be deterministic given the store contents. Slow; test oracle
    only. Parameter values are restored bit-exactly afterwards.
    """
    if h <= 0:
        raise ConfigError(f"finite-difference step must be positive, got {h}")
    out = {}
    for name, p in store.items():
        flat = p.data.reshape(-1)
        grad = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(f(store))
            flat[i] = orig - h
            f_minus = float(f(store))
            flat[i] = orig
            grad[i] = (f_plus - f_minus) / (2.0 * h)
        out[name] = grad.reshape(p.data.shape)
    return out
