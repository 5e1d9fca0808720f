"""Minimal dense networks in float64: rectifier MLP, Huber loss, Adam."""
from __future__ import annotations

import numpy as np


def glorot_uniform(fan_in: int, fan_out: int, rng) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float64)


class Mlp:
    """Fully connected net, rectifier on hidden layers, identity output."""

    def __init__(self, sizes, rng=None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = [glorot_uniform(a, b, rng) for a, b in zip(self.sizes, self.sizes[1:])]
        self.biases = [np.zeros(b, dtype=np.float64) for b in self.sizes[1:]]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.sizes = self.sizes
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input width {self.sizes[0]}, got {h.shape[1]}")
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                h = np.maximum(h, 0.0)
        return h[0] if single else h

    def forward_cache(self, x):
        """Forward pass retaining pre-activation inputs for backward()."""
        h = np.asarray(x, dtype=np.float64)
        if h.ndim == 1:
            h = h[None, :]
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input width {self.sizes[0]}, got {h.shape[1]}")
        acts = [h]
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, acts, grad_out):
        """Gradients of a scalar loss wrt every parameter given d(loss)/d(output).

        Returns [(dW_0, db_0), ...] in layer order.
        """
        grads = [None] * self.n_layers
        delta = np.asarray(grad_out, dtype=np.float64)
        if delta.ndim == 1:
            delta = delta[None, :]
        for i in range(self.n_layers - 1, -1, -1):
            grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0.0)
        return grads


def huber(td_error, delta: float = 1.0):
    e = np.asarray(td_error, dtype=np.float64)
    a = np.abs(e)
    out = np.where(a <= delta, 0.5 * e * e, delta * (a - 0.5 * delta))
    return float(out) if out.ndim == 0 else out


def huber_grad(td_error, delta: float = 1.0):
    """d huber / d td_error (the clipped error)."""
    e = np.asarray(td_error, dtype=np.float64)
    out = np.clip(e, -delta, delta)
    return float(out) if out.ndim == 0 else out


class Adam:
    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise ValueError("parameter/gradient count mismatch")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
