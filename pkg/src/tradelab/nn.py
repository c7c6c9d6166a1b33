"""Minimal dense-network core for the function-approximating agents.

Tensors are plain 2-D float64 numpy arrays (rows = batch).  The network
is input batch-norm -> dense -> ELU -> ... -> dense, with He-uniform
initialization, exact reverse-mode gradients for every parameter
(including the batch-norm scale/shift), Adam with configurable moment
decays, Huber and squared losses, and a central finite-difference
gradient checker.  Any non-finite intermediate raises ``NumericsError``
instead of propagating silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np


class NumericsError(FloatingPointError):
    """A forward or backward pass produced a non-finite value."""


def as_batch(x) -> np.ndarray:
    """Coerce input to a 2-D float64 batch (a single state becomes one row)."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"expected 1-D or 2-D input, got shape {a.shape}")
    return a


def _check_finite(a: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NumericsError(f"non-finite values in {where}")


def he_uniform(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / n_in)
    return rng.uniform(-bound, bound, size=(n_in, n_out))


class Dense:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.w = he_uniform(rng, n_in, n_out)
        self.b = np.zeros(n_out)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.w.shape[0]:
            raise ValueError(f"input width {x.shape[1]} != {self.w.shape[0]}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, dz: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward before forward")
        self.dw[...] = self._x.T @ dz
        self.db[...] = dz.sum(axis=0)
        return dz @ self.w.T

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def buffers(self):
        return []


class Elu:
    def __init__(self, alpha: float = 1.0):
        self.alpha = alpha
        self._x = None
        self._out = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        self._out = np.where(x > 0.0, x, self.alpha * np.expm1(np.minimum(x, 0.0)))
        return self._out

    def backward(self, dz: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward before forward")
        return dz * np.where(self._x > 0.0, 1.0, self._out + self.alpha)

    def params(self):
        return []

    def grads(self):
        return []

    def buffers(self):
        return []


class BatchNorm:
    """Feature-wise normalization with learned scale/shift.

    Train mode normalizes by batch statistics and updates the running
    estimates; eval mode uses the running estimates.  ``update_running``
    refreshes the statistics without a forward pass, for callers that
    must keep normalization frozen while they optimize.
    """

    def __init__(self, n_features: int, momentum: float = 0.99,
                 eps: float = 1e-5):
        self.gamma = np.ones(n_features)
        self.beta = np.zeros(n_features)
        self.running_mean = np.zeros(n_features)
        self.running_var = np.ones(n_features)
        self.momentum = momentum
        self.eps = eps
        self.dgamma = np.zeros_like(self.gamma)
        self.dbeta = np.zeros_like(self.beta)
        self._cache = None

    def update_running(self, x: np.ndarray) -> None:
        m = self.momentum
        self.running_mean[...] = m * self.running_mean + (1 - m) * x.mean(axis=0)
        self.running_var[...] = m * self.running_var + (1 - m) * x.var(axis=0)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            mu = x.mean(axis=0)
            var = x.var(axis=0)
            self.update_running(x)
        else:
            mu = self.running_mean
            var = self.running_var
        invstd = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * invstd
        self._cache = (xhat, invstd, train)
        return self.gamma * xhat + self.beta

    def backward(self, dz: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward before forward")
        xhat, invstd, train = self._cache
        self.dgamma[...] = (dz * xhat).sum(axis=0)
        self.dbeta[...] = dz.sum(axis=0)
        dxhat = dz * self.gamma
        if not train:
            return dxhat * invstd
        n = dz.shape[0]
        return (invstd / n) * (n * dxhat - dxhat.sum(axis=0)
                               - xhat * (dxhat * xhat).sum(axis=0))

    def params(self):
        return [self.gamma, self.beta]

    def grads(self):
        return [self.dgamma, self.dbeta]

    def buffers(self):
        return [self.running_mean, self.running_var]


class Mlp:
    """Dense network: optional input batch-norm, ELU hidden layers,
    linear output.  ``layer_sizes`` is [n_in, hidden..., n_out]."""

    def __init__(self, layer_sizes: Sequence[int], rng: np.random.Generator,
                 input_norm: bool = True, bn_momentum: float = 0.99):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = list(int(s) for s in layer_sizes)
        self.input_norm = bool(input_norm)
        self.bn_momentum = bn_momentum
        self.layers = []
        if self.input_norm:
            self.layers.append(BatchNorm(self.layer_sizes[0], bn_momentum))
        for i in range(len(self.layer_sizes) - 1):
            self.layers.append(Dense(self.layer_sizes[i],
                                     self.layer_sizes[i + 1], rng))
            if i < len(self.layer_sizes) - 2:
                self.layers.append(Elu())
        self._forward_done = False

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def forward(self, x, train: bool = False) -> np.ndarray:
        out = as_batch(x)
        _check_finite(out, "network input")
        for layer in self.layers:
            if isinstance(layer, BatchNorm):
                out = layer.forward(out, train=train)
            else:
                out = layer.forward(out)
            _check_finite(out, f"{type(layer).__name__} output")
        self._forward_done = True
        return out

    def backward(self, upstream: np.ndarray) -> List[np.ndarray]:
        """Backprop ``upstream`` (dLoss/dOutput) and return grads aligned
        with ``params()``."""
        if not self._forward_done:
            raise RuntimeError("backward before forward")
        dz = np.asarray(upstream, dtype=float)
        for layer in reversed(self.layers):
            dz = layer.backward(dz)
            _check_finite(dz, f"{type(layer).__name__} gradient")
        return self.grads()

    def update_input_stats(self, x) -> None:
        """Refresh input batch-norm running stats without a forward pass."""
        if self.input_norm:
            self.layers[0].update_running(as_batch(x))

    def params(self) -> List[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def grads(self) -> List[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.grads())
        return out

    def buffers(self) -> List[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.buffers())
        return out

    def state_arrays(self) -> List[np.ndarray]:
        return self.params() + self.buffers()

    def num_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "Mlp":
        other = Mlp(self.layer_sizes, np.random.default_rng(0),
                    input_norm=self.input_norm, bn_momentum=self.bn_momentum)
        for dst, src in zip(other.state_arrays(), self.state_arrays()):
            dst[...] = src
        return other

    def save(self, path) -> None:
        arrays = {f"param_{i}": p for i, p in enumerate(self.params())}
        arrays.update({f"buffer_{i}": b for i, b in enumerate(self.buffers())})
        np.savez(path, layer_sizes=np.array(self.layer_sizes),
                 input_norm=np.array(int(self.input_norm)),
                 bn_momentum=np.array(self.bn_momentum), **arrays)

    @classmethod
    def load(cls, path) -> "Mlp":
        with np.load(path) as data:
            net = cls(list(data["layer_sizes"]), np.random.default_rng(0),
                      input_norm=bool(int(data["input_norm"])),
                      bn_momentum=float(data["bn_momentum"]))
            for i, p in enumerate(net.params()):
                p[...] = data[f"param_{i}"]
            for i, b in enumerate(net.buffers()):
                b[...] = data[f"buffer_{i}"]
        return net


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """target <- tau * target + (1 - tau) * online, parameters and
    running statistics alike."""
    for t, o in zip(target.state_arrays(), online.state_arrays()):
        t *= tau
        t += (1.0 - tau) * o


def huber_loss(pred, target, delta: float = 1.0):
    """Mean continuous Huber loss and its gradient w.r.t. pred.

    Per element: e^2/2 for |e| <= delta, else delta (|e| - delta/2); the
    gradient is e/N clipped to +-delta/N.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    e = pred - target
    ae = np.abs(e)
    quad = ae <= delta
    per = np.where(quad, 0.5 * e * e, delta * (ae - 0.5 * delta))
    grad = np.clip(e, -delta, delta) / e.size
    return float(per.mean()), grad


def mse_loss(pred, target):
    """Mean squared error and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    e = pred - target
    return float(np.mean(e * e)), 2.0 * e / e.size


@dataclass
class AdamState:
    """Adam optimizer state with an optional stepwise exponential
    learning-rate decay (multiply by decay_rate every decay_every steps)."""

    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_rate: float = 1.0
    decay_every: int = 100
    step: int = 0
    m: Optional[List[np.ndarray]] = field(default=None, repr=False)
    v: Optional[List[np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")

    def current_lr(self) -> float:
        return self.lr * self.decay_rate ** (self.step // self.decay_every)


def adam_step(state: AdamState, params: Sequence[np.ndarray],
              grads: Sequence[np.ndarray]) -> None:
    """One bias-corrected Adam update, in place."""
    if state.m is None:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(params) != len(state.m):
        raise ValueError("parameter count changed under the optimizer")
    lr = state.current_lr()
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"grad shape {g.shape} != param {p.shape}")
        m[...] = state.beta1 * m + (1.0 - state.beta1) * g
        v[...] = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def finite_difference_check(loss_fn, params: Sequence[np.ndarray],
                            analytic: Sequence[np.ndarray],
                            step: float = 1e-5) -> float:
    """Max relative error between central finite differences of
    ``loss_fn()`` and the supplied analytic gradients.

    ``loss_fn`` must recompute the scalar loss from the current values of
    ``params``; parameters are perturbed in place and restored.
    """
    worst = 0.0
    for p, g in zip(params, analytic):
        fp = p.reshape(-1)
        fg = np.asarray(g).reshape(-1)
        for i in range(fp.size):
            orig = fp[i]
            fp[i] = orig + step
            up = loss_fn()
            fp[i] = orig - step
            down = loss_fn()
            fp[i] = orig
            fd = (up - down) / (2.0 * step)
            rel = abs(fd - fg[i]) / (abs(fd) + abs(fg[i]) + 1e-8)
            worst = max(worst, rel)
    return worst
