"""Dense feed-forward networks with hand-written backprop, and AdamW.

Everything operates on float64 numpy arrays and 2-D (batch, dim) inputs.
No autograd framework: forward passes return the cache that backward needs,
and the optimizer applies decoupled weight decay (parameters without a
gradient in a given step are left untouched).
"""

from __future__ import annotations

import numpy as np


class Mlp:
    """Linear layer stack with ReLU between layers and a linear output."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        if len(weights) != len(biases) or not weights:
            raise ValueError("weights and biases must be non-empty and aligned")
        self.weights = weights
        self.biases = biases

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray):
        """Returns (output, cache); x is (batch, in_dim)."""
        h = np.asarray(x, dtype=np.float64)
        if h.ndim != 2:
            raise ValueError("Mlp.forward expects a 2-D (batch, dim) input")
        acts = [h]
        pres = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pres.append(z)
            h = z if i == last else np.maximum(z, 0.0)
            acts.append(h)
        return h, (acts, pres)

    def backward(self, cache, dout: np.ndarray):
        """Gradients for a cached forward pass.

        Returns (grad_weights, grad_biases, grad_input); dout must be the
        gradient of the scalar loss w.r.t. the forward output.
        """
        acts, pres = cache
        n_layers = len(self.weights)
        gw = [None] * n_layers
        gb = [None] * n_layers
        d = dout
        for i in reversed(range(n_layers)):
            dz = d if i == n_layers - 1 else d * (pres[i] > 0.0)
            gw[i] = acts[i].T @ dz
            gb[i] = dz.sum(axis=0)
            d = dz @ self.weights[i].T
        return gw, gb, d

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def xavier_mlp(dims: list[int], rng: np.random.Generator, hidden_bias: float = 0.0) -> Mlp:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights.

    Hidden-layer biases start at ``hidden_bias`` (a small positive value
    keeps ReLU units alive at init); the output bias is zero.
    """
    weights = []
    biases = []
    n_layers = len(dims) - 1
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        bias = hidden_bias if i < n_layers - 1 else 0.0
        biases.append(np.full(fan_out, bias, dtype=np.float64))
    return Mlp(weights, biases)


class AdamW:
    """Adam with decoupled weight decay; per-array moments and step counts."""

    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-6, weight_decay=0.01):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self._state: dict[int, list] = {}

    def _slot(self, arr: np.ndarray) -> list:
        key = id(arr)
        if key not in self._state:
            # m, v, t, scratch
            self._state[key] = [np.zeros_like(arr), np.zeros_like(arr), 0, np.empty_like(arr)]
        return self._state[key]

    def step(self, arrays: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for arr, g in zip(arrays, grads):
            slot = self._slot(arr)
            m, v, _, buf = slot
            slot[2] = t = slot[2] + 1
            m *= self.beta1
            np.multiply(g, 1.0 - self.beta1, out=buf)
            m += buf
            v *= self.beta2
            np.multiply(g, g, out=buf)
            buf *= 1.0 - self.beta2
            v += buf
            np.divide(v, 1.0 - self.beta2**t, out=buf)
            np.sqrt(buf, out=buf)
            buf += self.eps
            np.divide(m, buf, out=buf)
            buf *= self.lr / (1.0 - self.beta1**t)
            arr -= buf
            arr *= 1.0 - self.lr * self.weight_decay

    def state_for(self, arr: np.ndarray):
        """(m, v, t) for a parameter array, creating zeros if unseen."""
        m, v, t, _ = self._slot(arr)
        return m, v, t

    def load_state(self, arr: np.ndarray, m: np.ndarray, v: np.ndarray, t: int) -> None:
        self._state[id(arr)] = [
            np.asarray(m, dtype=np.float64),
            np.asarray(v, dtype=np.float64),
            int(t),
            np.empty_like(arr),
        ]


def flatten_arrays(arrays: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays]) if arrays else np.zeros(0)


def unflatten_into(arrays: list[np.ndarray], vec: np.ndarray) -> None:
    """Write a flat vector back into the given arrays, in order."""
    offset = 0
    for a in arrays:
        a[...] = vec[offset : offset + a.size].reshape(a.shape)
        offset += a.size
    if offset != vec.size:
        raise ValueError("flat vector size does not match arrays")
