"""Dense layers and multilayer perceptrons with explicit backward passes.

Batches are rows: inputs are ``(n, in)`` float64 arrays. Gradients passed to
``backward`` are those of the (already batch-averaged) loss, so parameter
gradients are plain sums over rows.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

ACTIVATIONS = ("relu", "softmax", "identity")


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(s: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Vector-Jacobian product of softmax given its output ``s``."""
    return s * (grad - np.sum(grad * s, axis=-1, keepdims=True))


def glorot_uniform(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-a, a, size=(n_out, n_in))


class Dense:
    """``activation(x @ W.T + b)`` with ``W`` of shape ``(out, in)``."""

    def __init__(self, n_in: int, n_out: int, activation: str = "identity", rng: np.random.Generator | None = None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.W = glorot_uniform(rng, n_in, n_out)
        self.b = np.zeros(n_out)
        self.activation = activation
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._x = None
        self._out = None

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"Dense expects (n, {self.n_in}) input, got {x.shape}")
        pre = x @ self.W.T + self.b
        if self.activation == "relu":
            out = np.maximum(pre, 0.0)
        elif self.activation == "softmax":
            out = softmax(pre)
        else:
            out = pre
        self._x, self._out = x, out
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward called before forward")
        if self.activation == "relu":
            grad_pre = grad_out * (self._out > 0)
        elif self.activation == "softmax":
            grad_pre = softmax_backward(self._out, grad_out)
        else:
            grad_pre = grad_out
        self.dW = grad_pre.T @ self._x
        self.db = grad_pre.sum(axis=0)
        return grad_pre @ self.W

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def grads(self) -> list[np.ndarray]:
        return [self.dW, self.db]


def dense_forward(layer: Dense, x: np.ndarray) -> np.ndarray:
    """Single-input convenience wrapper around :meth:`Dense.forward`."""
    x = np.asarray(x, dtype=np.float64)
    return layer.forward(x[None])[0] if x.ndim == 1 else layer.forward(x)


class MLP:
    """Stack of dense layers: ReLU on hidden layers, ``output`` activation on the last."""

    def __init__(self, widths: Sequence[int], output: str = "identity", rng: np.random.Generator | None = None):
        if len(widths) < 2:
            raise ValueError("an MLP needs input and output widths")
        rng = np.random.default_rng(0) if rng is None else rng
        n = len(widths) - 1
        self.layers = [
            Dense(widths[i], widths[i + 1], output if i == n - 1 else "relu", rng) for i in range(n)
        ]

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def state(self, prefix: str) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"{prefix}.{i}.W"] = layer.W
            out[f"{prefix}.{i}.b"] = layer.b
        return out

    def load_state(self, prefix: str, arrays: dict[str, np.ndarray]) -> None:
        for i, layer in enumerate(self.layers):
            W, b = arrays[f"{prefix}.{i}.W"], arrays[f"{prefix}.{i}.b"]
            if W.shape != layer.W.shape or b.shape != layer.b.shape:
                raise ValueError(f"shape mismatch loading {prefix}.{i}")
            layer.W = np.array(W, dtype=np.float64)
            layer.b = np.array(b, dtype=np.float64)


@dataclass
class GaussianLatent:
    """Reparameterised draw ``z = mu + sigma * eps`` with ``sigma = exp(log_var / 2)``."""

    mu: np.ndarray
    log_var: np.ndarray
    eps: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(0.5 * self.log_var)

    @property
    def z(self) -> np.ndarray:
        return self.mu + self.sigma * self.eps

    def backward(self, grad_z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Gradients w.r.t. ``(mu, log_var)`` holding ``eps`` fixed."""
        return grad_z, grad_z * self.eps * self.sigma / 2


def reparameterize(mu, sigma=None, rng: np.random.Generator | None = None, *, log_var=None, eps=None) -> GaussianLatent:
    """Draw a latent from ``N(mu, sigma^2)``; pass either ``sigma`` or ``log_var``.

    ``eps`` may be supplied to fix the noise; otherwise it is drawn from ``rng``.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if log_var is None:
        sigma = np.asarray(sigma, dtype=np.float64)
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
        log_var = 2 * np.log(sigma)
    log_var = np.asarray(log_var, dtype=np.float64)
    if eps is None:
        rng = np.random.default_rng() if rng is None else rng
        eps = rng.standard_normal(mu.shape)
    return GaussianLatent(mu, log_var, np.asarray(eps, dtype=np.float64))
