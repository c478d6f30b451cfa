"""Small hand-differentiated building blocks.

Multilayer perceptrons act on row-major batches: an input of shape
``(batch, d_in)`` maps to ``(batch, d_out)``; a 1-D input is treated as a
batch of one and returned 1-D.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, UsageError

ACTIVATIONS = ("tanh", "identity")


@dataclass
class MlpParams:
    weights: list
    biases: list
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i} input {w.shape[1]} does not chain")

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def arrays(self) -> list[np.ndarray]:
        """Flat parameter list, weights and biases interleaved per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def zeros_like(self) -> MlpParams:
        return MlpParams([np.zeros_like(w) for w in self.weights],
                         [np.zeros_like(b) for b in self.biases], self.activation)

    def copy(self) -> MlpParams:
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases], self.activation)


@dataclass
class MlpCache:
    params_id: int
    dims: list
    inputs: list = field(default_factory=list)
    hidden: list = field(default_factory=list)
    squeeze: bool = False


def mlp_init(dims, activation: str = "tanh", seed=0) -> MlpParams:
    """Xavier-uniform weights, zero biases."""
    dims = list(dims)
    if len(dims) < 2 or any(int(d) <= 0 for d in dims):
        raise ValueError(f"dims must list at least two positive sizes, got {dims}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, activation)


def _act(z, kind):
    return np.tanh(z) if kind == "tanh" else z


def mlp_forward(p: MlpParams, x: np.ndarray):
    """Evaluate the network; hidden layers use ``p.activation``, the output is linear."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or h.shape[1] != p.dims[0]:
        raise ValueError(f"input shape {x.shape} does not match input dim {p.dims[0]}")
    cache = MlpCache(id(p), p.dims, squeeze=squeeze)
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        cache.inputs.append(h)
        h = h @ w.T + b
        if i < last:
            h = _act(h, p.activation)
            cache.hidden.append(h)
    return (h[0] if squeeze else h), cache


def mlp_backward(p: MlpParams, cache: MlpCache, dy: np.ndarray):
    """Reverse pass for ``<dy, y>``; returns ``(grads, dx)`` with grads shaped like ``p``."""
    if cache.params_id != id(p) or cache.dims != p.dims:
        raise UsageError("cache was produced by a different parameter set")
    dy = np.asarray(dy, dtype=float)
    g = dy[None, :] if cache.squeeze else dy
    if g.shape != (cache.inputs[0].shape[0], p.dims[-1]):
        raise ValueError(f"upstream shape {dy.shape} does not match the forward output")
    grads = p.zeros_like()
    for i in range(len(p.weights) - 1, -1, -1):
        grads.weights[i] = g.T @ cache.inputs[i]
        grads.biases[i] = g.sum(axis=0)
        g = g @ p.weights[i]
        if i > 0 and p.activation == "tanh":
            g = g * (1.0 - cache.hidden[i - 1] ** 2)
    return grads, (g[0] if cache.squeeze else g)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_ce(logits, true_class):
    """Cross-entropy of a softmax; vectorized over a leading batch axis.

    Returns ``(loss, dlogits)``; for a batch, ``loss`` is the per-row vector.
    """
    logits = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    if logits.shape[-1] < 2:
        raise ValueError("need at least two classes")
    y = np.asarray(true_class)
    if np.any(y < 0) or np.any(y >= logits.shape[-1]):
        raise ValueError(f"class index out of range [0, {logits.shape[-1]})")
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    logz = np.log(np.sum(np.exp(shifted), axis=-1))
    probs = np.exp(shifted - logz[..., None])
    if logits.ndim == 1:
        loss = logz - shifted[y]
        dlogits = probs.copy()
        dlogits[y] -= 1.0
        return float(loss), dlogits
    rows = np.arange(logits.shape[0])
    loss = logz - shifted[rows, y]
    dlogits = probs
    dlogits[rows, y] -= 1.0
    return loss, dlogits


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_label(score, y):
    """``log(1 + exp(s)) - y*s`` and its derivative ``sigmoid(s) - y`` (elementwise)."""
    s = np.asarray(score, dtype=float)
    if not np.all(np.isfinite(s)):
        raise NumericError("non-finite score")
    y = np.asarray(y, dtype=float)
    loss = np.logaddexp(0.0, s) - y * s
    dscore = sigmoid(s) - y
    if loss.ndim == 0:
        return float(loss), float(dscore)
    return loss, dscore


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f()`` w.r.t. array ``x`` (mutated in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = f()
        x[i] = old - eps
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def rel_error(a, b, floor: float = 1e-8) -> float:
    """Max elementwise |a-b| / max(|a|, |b|, floor)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom, initial=0.0))
