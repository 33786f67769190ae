"""Small tanh MLPs with hand-written backward passes."""
from __future__ import annotations

import numpy as np

from .numcore import FLOAT, SeededRng, flatten, unflatten


class MLP:
    """Fully connected net with tanh hidden layers and a linear output."""

    def __init__(self, sizes, rng: SeededRng):
        self.sizes = tuple(int(s) for s in sizes)
        self.params = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.params.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.params.append(np.zeros(fan_out, dtype=FLOAT))

    def get_vector(self):
        return flatten(self.params)

    def set_vector(self, vec):
        self.params = unflatten(vec, self.params)

    def forward(self, x, params=None):
        params = self.params if params is None else params
        acts = [x]
        h = x
        n_layers = len(params) // 2
        for k in range(n_layers):
            w, b = params[2 * k], params[2 * k + 1]
            h = h @ w.T + b
            if k < n_layers - 1:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, acts, g_out, params=None):
        """Return (param grads, input grad) for upstream gradient ``g_out``."""
        params = self.params if params is None else params
        n_layers = len(params) // 2
        grads = [None] * len(params)
        g = g_out
        for k in reversed(range(n_layers)):
            if k < n_layers - 1:
                g = g * (1.0 - acts[k + 1] ** 2)
            grads[2 * k] = g.T @ acts[k]
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ params[2 * k]
        return grads, g


def bce_with_logits(logits, labels, weights=None):
    """Mean binary cross-entropy and its gradient w.r.t. the logits."""
    logits = logits.ravel()
    labels = np.asarray(labels, dtype=FLOAT).ravel()
    weights = np.ones_like(labels) if weights is None else np.asarray(weights, dtype=FLOAT).ravel()
    n = logits.size
    # log(1 + exp(-|l|)) + max(l, 0) - l * y
    loss = np.logaddexp(0.0, logits) - logits * labels
    sig = 0.5 * (1.0 + np.tanh(0.5 * logits))
    grad = weights * (sig - labels) / n
    return float((weights * loss).mean()), grad.reshape(-1, 1)
