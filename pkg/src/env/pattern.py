"""
Traffic pattern and reward tables of the transportation network.

Both are piecewise constant in the epoch `t` (1..H): a pattern is an ordered
list of blocks covering `1..H` without gaps, and every per-epoch query is an
index lookup into the block that holds `t`. Regions are 0-based.
"""
from dataclasses import dataclass, field

import numpy as np

from src.infra.errors import PatternError

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TrafficBlock:
    t_start: int
    t_end: int
    lam: np.ndarray   # (R,) mean arrivals per minute at each origin
    P: np.ndarray     # (R, R) destination probabilities, rows sum to 1
    tau: np.ndarray   # (R, R) integer trip durations in minutes


@dataclass(frozen=True, eq=False)
class TrafficPattern:
    name: str
    R: int
    H: int
    L: int
    N: int
    blocks: tuple[TrafficBlock, ...]
    tau_max: np.ndarray = field(init=False)
    _block_of: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._validate()
        block_of = np.zeros(self.H + 1, dtype=np.int64)
        for i, b in enumerate(self.blocks):
            block_of[b.t_start:b.t_end + 1] = i
        tau_max = np.max(np.stack([b.tau for b in self.blocks]), axis=(0, 1)).astype(np.int64)
        object.__setattr__(self, "_block_of", block_of)
        object.__setattr__(self, "tau_max", tau_max)

    def _validate(self):
        if min(self.R, self.H, self.N) < 1 or self.L < 0:
            raise PatternError(f"{self.name}: R, H, N must be >= 1 and L >= 0")
        expected_start = 1
        for b in self.blocks:
            if b.t_start != expected_start or b.t_end < b.t_start:
                raise PatternError(
                    f"{self.name}: blocks must cover 1..{self.H} contiguously "
                    f"(block starting at {b.t_start}, expected {expected_start})"
                )
            expected_start = b.t_end + 1
            if b.lam.shape != (self.R,) or b.P.shape != (self.R, self.R) or b.tau.shape != (self.R, self.R):
                raise PatternError(f"{self.name}: block {b.t_start}-{b.t_end} has wrong table shapes")
            if np.any(b.lam < 0) or np.any(b.P < 0):
                raise PatternError(f"{self.name}: negative entry in block {b.t_start}-{b.t_end}")
            if not np.all(np.isfinite(b.lam)) or not np.all(np.isfinite(b.P)):
                raise PatternError(f"{self.name}: non-finite entry in block {b.t_start}-{b.t_end}")
            rows = np.abs(b.P.sum(axis=1) - 1.0)
            if np.any(rows > ROW_SUM_TOL):
                o = int(np.argmax(rows))
                raise PatternError(f"{self.name}: row-sum of P[{o}] is not 1 in block {b.t_start}-{b.t_end}")
            if np.any(b.tau < 1):
                raise PatternError(f"{self.name}: trip durations must be >= 1 minute")
            if np.min(b.tau) <= self.L:
                raise PatternError(
                    f"{self.name}: patience assumption violated (trip duration {int(np.min(b.tau))} "
                    f"<= L={self.L} in block {b.t_start}-{b.t_end})"
                )
        if expected_start != self.H + 1:
            raise PatternError(f"{self.name}: blocks end at {expected_start - 1}, horizon is {self.H}")

    def block(self, t: int) -> TrafficBlock:
        if not 1 <= t <= self.H:
            raise IndexError(f"epoch {t} outside 1..{self.H}")
        return self.blocks[self._block_of[t]]

    def arrival_rates(self, t: int) -> np.ndarray:
        return self.block(t).lam

    def destination_probs(self, t: int) -> np.ndarray:
        return self.block(t).P

    def durations(self, t: int) -> np.ndarray:
        return self.block(t).tau

    @property
    def eta_cap(self) -> int:
        """Largest remaining travel time any car can carry."""
        return int(self.tau_max.max()) + self.L

    def daily_demand(self) -> np.ndarray:
        """Σ_t λ_o(t) per origin."""
        return sum((b.t_end - b.t_start + 1) * b.lam for b in self.blocks)

    def scaled(self, demand_scale: float = 1.0, fleet_size: int | None = None, name: str | None = None) -> "TrafficPattern":
        blocks = tuple(
            TrafficBlock(b.t_start, b.t_end, b.lam * demand_scale, b.P, b.tau) for b in self.blocks
        )
        return TrafficPattern(name or self.name, self.R, self.H, self.L, fleet_size or self.N, blocks)


@dataclass(frozen=True, eq=False)
class RewardBlock:
    t_start: int
    t_end: int
    match: np.ndarray        # (R, R, L+1)  c^f_t(o, d, η)
    empty_cost: np.ndarray   # (R, R)       c^e_t(o, d)


@dataclass(frozen=True, eq=False)
class RewardSpec:
    blocks: tuple[RewardBlock, ...]
    _block_of: np.ndarray = field(repr=False)

    @classmethod
    def from_blocks(cls, blocks, H: int) -> "RewardSpec":
        block_of = np.full(H + 1, -1, dtype=np.int64)
        for i, b in enumerate(blocks):
            if not (np.all(np.isfinite(b.match)) and np.all(np.isfinite(b.empty_cost))):
                raise PatternError("reward tables must be finite")
            block_of[b.t_start:b.t_end + 1] = i
        if np.any(block_of[1:] < 0):
            raise PatternError("reward blocks must cover every epoch")
        return cls(tuple(blocks), block_of)

    @classmethod
    def constant(cls, pattern: TrafficPattern, match: float = 1.0, empty_cost: float = 0.0) -> "RewardSpec":
        R, L = pattern.R, pattern.L
        block = RewardBlock(
            1, pattern.H,
            np.full((R, R, L + 1), float(match)),
            np.full((R, R), float(empty_cost)),
        )
        return cls.from_blocks([block], pattern.H)

    def match_reward(self, t: int, o: int, d: int, eta: int) -> float:
        return float(self.blocks[self._block_of[t]].match[o, d, eta])

    def empty_route_cost(self, t: int, o: int, d: int) -> float:
        return float(self.blocks[self._block_of[t]].empty_cost[o, d])
