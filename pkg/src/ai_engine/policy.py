"""
State featurization, the masked-softmax trip policy and the value approximator.

Numeric features are the raw counts [cars | passengers | do-nothing], each
divided by a scale (the fleet size by default). The epoch is fed separately to
the embedding layer.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from src.env.pattern import TrafficPattern
from src.env.state import SdmState
from src.infra.errors import InfeasibleActionError, ShapeError
from src.nn.network import Network, NetworkSpec, forward
from src.nn.optim import OptimizerState
from src.sdm.engine import feasible_mask


@dataclass(frozen=True)
class EncoderConfig:
    R: int
    H: int
    L: int
    N: int
    car_widths: tuple[int, ...]      # tau_max[d] + L + 1 per destination
    car_scale: float
    passenger_scale: float

    @classmethod
    def from_pattern(cls, pattern: TrafficPattern, passenger_scale: float | None = None) -> "EncoderConfig":
        return cls(
            R=pattern.R,
            H=pattern.H,
            L=pattern.L,
            N=pattern.N,
            car_widths=tuple(int(w) for w in pattern.tau_max + pattern.L + 1),
            car_scale=float(pattern.N),
            passenger_scale=float(passenger_scale or pattern.N),
        )

    @property
    def car_length(self) -> int:
        return sum(self.car_widths)

    @property
    def feature_length(self) -> int:
        return self.car_length + self.R * self.R + self.R * (self.L + 1)

    @property
    def layout(self) -> dict[str, tuple[int, int]]:
        cars_end = self.car_length
        pass_end = cars_end + self.R * self.R
        return {"cars": (0, cars_end), "passengers": (cars_end, pass_end), "do_nothing": (pass_end, self.feature_length)}

    def scales(self) -> np.ndarray:
        s = np.empty(self.feature_length)
        (c0, c1), (p0, p1), (n0, n1) = self.layout.values()
        s[c0:c1], s[p0:p1], s[n0:n1] = self.car_scale, self.passenger_scale, self.car_scale
        return s

    @property
    def raw_dtype(self) -> np.dtype:
        """Smallest unsigned type that holds every car count; passengers are checked per state."""
        return np.dtype(np.uint16 if self.N <= np.iinfo(np.uint16).max else np.uint32)

    def raw_counts(self, state: SdmState) -> np.ndarray:
        if state.R != self.R or state.L != self.L or state.cars.counts.shape[1] < max(self.car_widths):
            raise ShapeError(f"state (R={state.R}, L={state.L}) does not match encoder (R={self.R}, L={self.L})")
        cars = [state.cars.counts[d, :w] for d, w in enumerate(self.car_widths)]
        raw = np.concatenate([*cars, state.passengers.counts.ravel(), state.do_nothing.ravel()])
        dtype = self.raw_dtype
        if raw.size and raw.max() > np.iinfo(dtype).max:
            raise ShapeError(f"count {int(raw.max())} does not fit the {dtype} observation buffer")
        return raw.astype(dtype)

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        return np.asarray(raw, dtype=np.float64) / self.scales()

    def mask_from_raw(self, raw: np.ndarray) -> np.ndarray:
        """Feasibility mask recovered from the car block of raw count rows."""
        raw = np.atleast_2d(raw)
        starts = np.concatenate([[0], np.cumsum(self.car_widths)[:-1]])
        avail = np.stack([raw[:, s:s + self.L + 1].sum(axis=1) for s in starts], axis=1) > 0
        return np.repeat(avail, self.R, axis=1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["car_widths"] = list(self.car_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**{**d, "car_widths": tuple(d["car_widths"])})


def encode_state(state: SdmState, cfg: EncoderConfig):
    """Returns (time_index, normalized numeric feature vector)."""
    return state.epoch, cfg.normalize(cfg.raw_counts(state))


@dataclass
class PolicyParams:
    network: Network
    encoder: EncoderConfig
    optimizer: OptimizerState | None = field(default=None, repr=False)

    def distribution(self, state: SdmState) -> np.ndarray:
        return policy_distribution(self, state)


@dataclass
class ValueParams:
    """Value net; it regresses returns divided by `return_scale` and reports them in reward units."""
    network: Network
    encoder: EncoderConfig
    optimizer: OptimizerState | None = field(default=None, repr=False)
    return_scale: float = 1.0


def build_networks(pattern: TrafficPattern, embedding_dim: int, hidden_sizes, activation: str = "relu",
                   seed: int = 0, passenger_scale: float | None = None, return_scale: float | None = None):
    """Two separate networks with the same trunk shape: R*R softmax policy and scalar value.

    Value targets are divided by `return_scale` (the fleet size by default) so the
    regression works on O(1) numbers whatever the reward totals are.
    """
    encoder = EncoderConfig.from_pattern(pattern, passenger_scale)
    rng = np.random.default_rng(seed)
    common = dict(vocab=pattern.H, embedding_dim=embedding_dim, input_dim=encoder.feature_length,
                  hidden_sizes=tuple(hidden_sizes), activation=activation)
    policy = PolicyParams(Network(NetworkSpec(output_dim=pattern.R ** 2, head="softmax", **common), rng), encoder)
    value = ValueParams(Network(NetworkSpec(output_dim=1, head="identity", **common), rng), encoder,
                        return_scale=float(return_scale or pattern.N))
    return policy, value


def policy_distribution(params: PolicyParams, state: SdmState) -> np.ndarray:
    mask = feasible_mask(state)
    if not mask.any():
        raise InfeasibleActionError(f"epoch {state.epoch}: no feasible trip (empty mask)")
    t, x = encode_state(state, params.encoder)
    probs, _ = forward(params.network, t, x, mask)
    return probs


def value_estimate(params: ValueParams, state: SdmState) -> float:
    t, x = encode_state(state, params.encoder)
    out, _ = forward(params.network, t, x)
    return float(out[0]) * params.return_scale
