"""Small dense networks with manual backprop, plus Adam/SGD optimizers.

The learner only needs modest two-hidden-layer perceptrons, so the forward
and backward passes are written directly in numpy. Gradients are exact
sums over the batch; loss averaging lives with the caller. Everything is
deterministic given the initialization generator, and all state is plain
arrays so checkpoints serialize trivially.
"""

from __future__ import annotations

import numpy as np


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, y):
    del y
    return (z > 0.0).astype(z.dtype)


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(z, y):
    del z
    return 1.0 - y * y


def _identity(z):
    return z


def _identity_grad(z, y):
    del y
    return np.ones_like(z)


_ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (_tanh, _tanh_grad),
    "identity": (_identity, _identity_grad),
}


class Mlp:
    """Fully connected network: hidden rectifiers, configurable output."""

    def __init__(self, widths, output_activation: str = "identity",
                 hidden_activation: str = "relu",
                 rng: np.random.Generator | None = None,
                 final_init_scale: float = 3e-3):
        if len(widths) < 2:
            raise ValueError("need at least input and output widths")
        self.widths = [int(w) for w in widths]
        self.activations = ([hidden_activation] * (len(widths) - 2)
                            + [output_activation])
        for name in self.activations:
            if name not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {name!r}")
        rng = rng or np.random.default_rng()
        self.weights = []
        self.biases = []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            if i == len(widths) - 2:
                lim = final_init_scale  # small final layer, standard for TD3
            else:
                lim = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-lim, lim, (fan_in, fan_out)))
            self.biases.append(rng.uniform(-lim, lim, fan_out))

    # -- forward / backward -------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        for W, b, name in zip(self.weights, self.biases, self.activations):
            x = _ACTIVATIONS[name][0](x @ W + b)
        return x

    def forward_cached(self, x: np.ndarray):
        """Forward pass keeping what the backward pass needs."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cache = []
        for W, b, name in zip(self.weights, self.biases, self.activations):
            z = x @ W + b
            y = _ACTIVATIONS[name][0](z)
            cache.append((x, z, y, name))
            x = y
        return x, cache

    def backward(self, cache, grad_out: np.ndarray):
        """Sum-over-batch parameter gradients and the input gradient."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        g = np.asarray(grad_out, dtype=float)
        for i in range(len(self.weights) - 1, -1, -1):
            x, z, y, name = cache[i]
            gz = g * _ACTIVATIONS[name][1](z, y)
            grads_w[i] = x.T @ gz
            grads_b[i] = gz.sum(axis=0)
            g = gz @ self.weights[i].T
        return grads_w, grads_b, g

    # -- parameter plumbing --------------------------------------------------

    def parameters(self):
        return self.weights + self.biases

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.widths = list(self.widths)
        clone.activations = list(self.activations)
        clone.weights = [W.copy() for W in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def load_from(self, other: "Mlp"):
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src

    def blend_from(self, other: "Mlp", mix: float):
        """Convex update: self = mix * other + (1 - mix) * self."""
        for dst, src in zip(self.parameters(), other.parameters()):
            dst *= (1.0 - mix)
            dst += mix * src

    def flatten(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def load_flat(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=float)
        offset = 0
        for p in self.parameters():
            n = p.size
            p[...] = vec[offset:offset + n].reshape(p.shape)
            offset += n
        if offset != vec.size:
            raise ValueError("flat vector length does not match network")


class Adam:
    """Adam over a list of parameter arrays."""

    def __init__(self, params, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def state_dict(self):
        return {"step_count": self.step_count,
                "m": [m.copy() for m in self.m],
                "v": [v.copy() for v in self.v]}

    def load_state_dict(self, state):
        self.step_count = int(state["step_count"])
        for dst, src in zip(self.m, state["m"]):
            dst[...] = src
        for dst, src in zip(self.v, state["v"]):
            dst[...] = src


class Sgd:
    """Plain gradient descent; kept for the paper-style update rule."""

    def __init__(self, params, lr: float):
        del params
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g

    def state_dict(self):
        return {}

    def load_state_dict(self, state):
        del state


def make_optimizer(kind: str, params, lr: float):
    if kind == "adam":
        return Adam(params, lr)
    if kind == "sgd":
        return Sgd(params, lr)
    raise ValueError(f"unknown optimizer {kind!r}")
