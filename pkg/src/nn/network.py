"""
Feed-forward network: time-of-day embedding concatenated with numeric
features, a stack of dense layers, and a softmax or identity head.
"""
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from src.infra.errors import ShapeError, StaleTapeError
from src.nn.layers import Dense, Embedding, masked_softmax, softmax_backward


@dataclass(frozen=True)
class NetworkSpec:
    vocab: int                       # number of epochs H (embedding rows)
    embedding_dim: int               # 0 disables the embedding layer
    input_dim: int                   # numeric feature length
    hidden_sizes: tuple[int, ...]
    output_dim: int
    head: Literal["softmax", "identity"] = "identity"
    activation: str = "relu"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(**{**d, "hidden_sizes": tuple(d["hidden_sizes"])})


class Network:
    def __init__(self, spec: NetworkSpec, seed: int | np.random.Generator = 0):
        self.spec = spec
        self.embedding = Embedding("embedding", spec.vocab, spec.embedding_dim) if spec.embedding_dim else None
        sizes = [spec.embedding_dim + spec.input_dim, *spec.hidden_sizes, spec.output_dim]
        self.dense = [
            Dense(f"dense{i}", sizes[i], sizes[i + 1], spec.activation if i < len(sizes) - 2 else "identity")
            for i in range(len(sizes) - 1)
        ]
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        self.param_groups: dict[str, str] = {}
        for layer in self.layers:
            for name, value in layer.init_params(rng).items():
                self.params[name] = value
                self.param_groups[name] = layer.group
        self.version = 0

    @property
    def layers(self):
        return ([self.embedding] if self.embedding else []) + self.dense

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for name, value in params.items():
            if name not in self.params or self.params[name].shape != value.shape:
                raise ShapeError(f"parameter {name} does not fit this network")
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in self.params}
        self.version += 1

    def zero_(self) -> "Network":
        self.set_params({k: np.zeros_like(v) for k, v in self.params.items()})
        return self


@dataclass
class Tape:
    network: Network
    version: int
    single: bool
    embedding_rows: np.ndarray | None
    dense_caches: list = field(default_factory=list)
    probs: np.ndarray | None = None


def _as_batch(time_index, features):
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    if single:
        features = features[None, :]
    time_index = np.atleast_1d(np.asarray(time_index, dtype=np.int64))
    if time_index.shape[0] != features.shape[0]:
        raise ShapeError(f"{time_index.shape[0]} time indices for {features.shape[0]} feature rows")
    return time_index, features, single


def forward(net: Network, time_index, features, mask=None):
    """Evaluate the network; returns (output, tape). Accepts one sample or a batch."""
    time_index, x, single = _as_batch(time_index, features)
    if x.shape[1] != net.spec.input_dim:
        raise ShapeError(f"expected {net.spec.input_dim} features, got {x.shape[1]}")
    tape = Tape(net, net.version, single, None)
    if net.embedding:
        emb, tape.embedding_rows = net.embedding.forward(net.params, time_index)
        x = np.concatenate([emb, x], axis=1)
    for layer in net.dense:
        x, cache = layer.forward(net.params, x)
        tape.dense_caches.append(cache)
    if net.spec.head == "softmax":
        if mask is not None:
            mask = np.atleast_2d(mask)
        x = masked_softmax(x, mask)
        tape.probs = x
    return (x[0] if single else x), tape


def backward(tape: Tape, output_gradient) -> dict[str, np.ndarray]:
    """Gradients of <output, output_gradient> with respect to every parameter."""
    net = tape.network
    if tape.version != net.version:
        raise StaleTapeError(f"tape recorded at version {tape.version}, network is at {net.version}")
    g = np.asarray(output_gradient, dtype=np.float64)
    if tape.single:
        g = g[None, :]
    if tape.probs is not None:
        g = softmax_backward(tape.probs, g)
    grads = {}
    for layer, cache in zip(reversed(net.dense), reversed(tape.dense_caches)):
        g, layer_grads = layer.backward(net.params, cache, g)
        grads.update(layer_grads)
    if net.embedding:
        grads.update(net.embedding.backward(net.params, tape.embedding_rows, g[:, : net.spec.embedding_dim]))
    return grads
