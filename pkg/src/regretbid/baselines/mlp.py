"""Two-hidden-layer ReLU network trained with Adam, in plain numpy.

All weights live in one flat vector so that an Adam update is a few vector
operations; the per-layer matrices are views into it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TooFewRows
from ._kernels import adam_train


def _layout(n_in: int, hidden: int):
    shapes = [(n_in, hidden), (hidden,), (hidden, hidden), (hidden,), (hidden, 1), (1,)]
    offsets = np.cumsum([0] + [int(np.prod(s)) for s in shapes])
    return shapes, offsets


def unpack(theta, n_in: int, hidden: int):
    shapes, offsets = _layout(n_in, hidden)
    return [theta[offsets[i]:offsets[i + 1]].reshape(s) for i, s in enumerate(shapes)]


def glorot_init(rng, n_in: int, hidden: int) -> np.ndarray:
    shapes, offsets = _layout(n_in, hidden)
    theta = np.zeros(offsets[-1])
    parts = unpack(theta, n_in, hidden)
    for W in parts[0::2]:
        limit = np.sqrt(6.0 / (W.shape[0] + W.shape[1]))
        W[...] = rng.uniform(-limit, limit, W.shape)
    return theta


def loss_and_grad(theta, X, y, hidden: int):
    """Mean squared error and its gradient with respect to the flat weights."""
    W1, b1, W2, b2, W3, b3 = unpack(theta, X.shape[1], hidden)
    z1 = X @ W1 + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ W2 + b2
    h2 = np.maximum(z2, 0.0)
    out = (h2 @ W3)[:, 0] + b3[0]
    err = out - y
    n = len(y)
    loss = float(err @ err) / n
    grad = np.empty_like(theta)
    gW1, gb1, gW2, gb2, gW3, gb3 = unpack(grad, X.shape[1], hidden)
    d_out = (2.0 / n) * err
    gW3[:, 0] = h2.T @ d_out
    gb3[0] = d_out.sum()
    d2 = np.outer(d_out, W3[:, 0]) * (z2 > 0)
    gW2[...] = h1.T @ d2
    gb2[...] = d2.sum(axis=0)
    d1 = (d2 @ W2.T) * (z1 > 0)
    gW1[...] = X.T @ d1
    gb1[...] = d1.sum(axis=0)
    return loss, grad


@dataclass(frozen=True)
class MlpModel:
    theta: np.ndarray
    hidden: int
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    seed: int

    def weights(self):
        return unpack(self.theta, len(self.x_mean), self.hidden)

    def predict(self, X) -> np.ndarray:
        Z = (np.atleast_2d(np.asarray(X, dtype=float)) - self.x_mean) / self.x_scale
        W1, b1, W2, b2, W3, b3 = self.weights()
        h = np.maximum(Z @ W1 + b1, 0.0)
        h = np.maximum(h @ W2 + b2, 0.0)
        return self.y_mean + self.y_scale * ((h @ W3)[:, 0] + b3[0])


def _scale(v):
    s = np.std(v, axis=0)
    return np.where(s > 0, s, 1.0)


def fit_mlp2(
    X,
    y,
    seed: int = 0,
    hidden: int = 128,
    epochs: int = 100,
    batch: int = 10,
    lr: float = 1e-4,
    betas: tuple = (0.9, 0.999),
    eps: float = 1e-8,
) -> MlpModel:
    """Minibatch Adam on standardised inputs and target, seeded end to end."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) < 10:
        raise TooFewRows(f"network needs at least 10 rows, got {len(X)}")
    x_mean, x_scale = X.mean(axis=0), _scale(X)
    y_mean, y_scale = float(y.mean()), float(_scale(y))
    Z = (X - x_mean) / x_scale
    t_y = (y - y_mean) / y_scale
    rng = np.random.default_rng(seed)
    theta = glorot_init(rng, X.shape[1], hidden)
    perms = np.stack([rng.permutation(len(Z)) for _ in range(epochs)]) if epochs else np.zeros((0, len(Z)), np.int64)
    W1, b1, W2, b2, W3, b3 = unpack(theta, X.shape[1], hidden)
    adam_train(np.ascontiguousarray(Z), t_y, W1, b1, W2, b2, W3, b3, perms, batch, lr, betas[0], betas[1], eps)
    return MlpModel(theta, hidden, x_mean, x_scale, y_mean, y_scale, seed)


def reference_train(X, y, theta, perms, hidden=128, batch=10, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
    """Uncompiled Adam loop on already-standardised data; a cross-check for the compiled one."""
    theta = theta.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2 = betas
    step = 0
    for perm in perms:
        for start in range(0, len(X), batch):
            idx = perm[start:start + batch]
            _, g = loss_and_grad(theta, X[idx], y[idx], hidden)
            step += 1
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
            c1, c2 = 1.0 - b1**step, 1.0 - b2**step
            theta -= lr * np.sqrt(c2) / c1 * m / (np.sqrt(v) + eps * np.sqrt(c2))
    return theta
