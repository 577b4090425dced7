"""Fully connected tanh network with analytic gradients and Adam, in numpy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def init_params(sizes, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Uniform weights with variance ``1 / fan_in``; zero biases."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(3.0 / fan_in)
        params.append((rng.uniform(-bound, bound, (fan_in, fan_out)), np.zeros(fan_out)))
    return params


def forward(params, x: np.ndarray) -> np.ndarray:
    h = x
    for w, b in params[:-1]:
        h = np.tanh(h @ w + b)
    w, b = params[-1]
    return h @ w + b


def loss_and_grad(params, x: np.ndarray, y: np.ndarray):
    """Mean squared error over all outputs and its gradient per layer."""
    acts = [x]
    h = x
    for w, b in params[:-1]:
        h = np.tanh(h @ w + b)
        acts.append(h)
    w, b = params[-1]
    out = h @ w + b
    diff = out - y
    loss = float(np.mean(diff ** 2))
    delta = 2.0 * diff / diff.size
    grads = [None] * len(params)
    for k in range(len(params) - 1, -1, -1):
        w, _ = params[k]
        grads[k] = (acts[k].T @ delta, delta.sum(axis=0))
        if k:
            delta = (delta @ w.T) * (1.0 - acts[k] ** 2)
    return loss, grads


@dataclass
class Adam:
    lr: float = 5e-4
    eps: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    t: int = 0

    def __post_init__(self) -> None:
        self._m = None
        self._v = None

    def step(self, params, grads):
        if self._m is None:
            self._m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
            self._v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        new = []
        for k, ((w, b), (gw, gb)) in enumerate(zip(params, grads)):
            (mw, mb), (vw, vb) = self._m[k], self._v[k]
            for m, v, g in ((mw, vw, gw), (mb, vb, gb)):
                m *= self.beta1
                m += (1 - self.beta1) * g
                v *= self.beta2
                v += (1 - self.beta2) * g * g
            w = w - self.lr * (mw / c1) / (np.sqrt(vw / c2) + self.eps)
            b = b - self.lr * (mb / c1) / (np.sqrt(vb / c2) + self.eps)
            new.append((w, b))
        return new


def flatten(params) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in params])


def unflatten(vec: np.ndarray, like):
    out, k = [], 0
    for w, b in like:
        nw, nb = w.size, b.size
        out.append((vec[k:k + nw].reshape(w.shape), vec[k + nw:k + nw + nb].reshape(b.shape)))
        k += nw + nb
    return out


def gradient_check(params, x, y, h: float = 1e-6) -> float:
    """Largest relative gap between analytic and central-difference gradients."""
    _, grads = loss_and_grad(params, x, y)
    analytic = flatten(grads)
    base = flatten(params)
    numeric = np.empty_like(base)
    for i in range(base.size):
        up, dn = base.copy(), base.copy()
        up[i] += h
        dn[i] -= h
        lu = loss_and_grad(unflatten(up, params), x, y)[0]
        ld = loss_and_grad(unflatten(dn, params), x, y)[0]
        numeric[i] = (lu - ld) / (2 * h)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    scale = np.maximum(scale, 1e-8 * max(1.0, float(np.abs(analytic).max())))
    return float(np.max(np.abs(analytic - numeric) / scale))
