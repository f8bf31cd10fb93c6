"""
Layers of the dense network stack.

Layers are stateless with respect to parameters: they read their arrays from
the owning network's `params` dict by name, so an optimizer can swap the whole
dict without touching the layer objects. `forward` returns (output, cache) and
`backward` consumes the cache.
"""
import numpy as np

from src.infra.errors import ShapeError

EMBEDDING_INIT = 0.05


def relu(z):
    return np.maximum(z, 0.0)


def relu_grad(z):
    return (z > 0.0).astype(z.dtype)


ACTIVATIONS = {
    "relu": (relu, relu_grad),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


class Embedding:
    group = "embedding"

    def __init__(self, name: str, vocab: int, dim: int):
        self.name, self.vocab, self.dim = name, vocab, dim
        self.weight = f"{name}.weight"

    def init_params(self, rng: np.random.Generator) -> dict:
        return {self.weight: rng.uniform(-EMBEDDING_INIT, EMBEDDING_INIT, size=(self.vocab, self.dim))}

    def forward(self, params, time_index: np.ndarray):
        if np.any(time_index < 1) or np.any(time_index > self.vocab):
            raise ShapeError(f"{self.name}: time index outside 1..{self.vocab}")
        rows = time_index - 1
        return params[self.weight][rows], rows

    def backward(self, params, rows, grad_out) -> dict:
        grad = np.zeros_like(params[self.weight])
        np.add.at(grad, rows, grad_out)
        return {self.weight: grad}


class Dense:
    group = "dense"

    def __init__(self, name: str, in_dim: int, out_dim: int, activation: str = "relu"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.name, self.in_dim, self.out_dim, self.activation = name, in_dim, out_dim, activation
        self.weight, self.bias = f"{name}.weight", f"{name}.bias"

    def init_params(self, rng: np.random.Generator) -> dict:
        bound = 1.0 / np.sqrt(self.in_dim)
        return {
            self.weight: rng.uniform(-bound, bound, size=(self.in_dim, self.out_dim)),
            self.bias: np.zeros(self.out_dim),
        }

    def forward(self, params, x):
        if x.shape[1] != self.in_dim:
            raise ShapeError(f"{self.name}: expected {self.in_dim} inputs, got {x.shape[1]}")
        z = x @ params[self.weight] + params[self.bias]
        act, _ = ACTIVATIONS[self.activation]
        return act(z), (x, z)

    def backward(self, params, cache, grad_out):
        x, z = cache
        _, dact = ACTIVATIONS[self.activation]
        dz = grad_out * dact(z)
        grads = {self.weight: x.T @ dz, self.bias: dz.sum(axis=0)}
        return dz @ params[self.weight].T, grads


def masked_softmax(logits: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Row-wise softmax; masked-out entries get exactly 0 probability."""
    if mask is None:
        mask = np.ones_like(logits, dtype=bool)
    if not np.all(mask.any(axis=1)):
        raise ShapeError("softmax: every row needs at least one unmasked entry")
    shifted = np.where(mask, logits, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(probs: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return probs * (grad_out - (grad_out * probs).sum(axis=1, keepdims=True))
