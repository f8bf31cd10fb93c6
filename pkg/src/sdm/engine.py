"""
Sequential decision making within one epoch.

Every available car (remaining time <= L to its destination) is addressed by
exactly one atomic (origin, destination) action. The car closest to the origin
takes the trip; matching a waiting passenger beats empty routing; anything else
turns the car into a do-nothing car that stays out of the pool until the next
epoch.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Protocol

import numpy as np

from src.env.dynamics import advance_time, reset
from src.env.pattern import RewardSpec, TrafficPattern
from src.env.state import SdmState, SystemState
from src.infra.errors import InfeasibleActionError


class TaskKind(str, Enum):
    MATCH = "match"
    EMPTY_ROUTE = "empty-route"
    DO_NOTHING = "do-nothing"


@dataclass(frozen=True)
class AtomicAction:
    origin: int
    destination: int

    def index(self, R: int) -> int:
        return self.origin * R + self.destination

    @classmethod
    def from_index(cls, index: int, R: int) -> "AtomicAction":
        return cls(int(index) // R, int(index) % R)


@dataclass
class StepRecord:
    epoch: int
    step: int
    action: AtomicAction
    kind: TaskKind
    reward: float
    behavior_prob: float
    observation: Any = field(default=None, repr=False)


class Policy(Protocol):
    """Anything that maps an SDM state to a distribution over the R*R trips."""

    def distribution(self, state: SdmState) -> np.ndarray: ...


def available_car_count(state: SdmState) -> int:
    return int(state.cars.counts[:, : state.L + 1].sum())


def feasible_origins(state: SdmState) -> np.ndarray:
    return state.cars.counts[:, : state.L + 1].sum(axis=1) > 0


def feasible_mask(state: SdmState) -> np.ndarray:
    """mask[o*R + d] is True iff some car is at most L minutes from region o."""
    return np.repeat(feasible_origins(state), state.R)


def apply_atomic(state: SdmState, action: AtomicAction, rewards: RewardSpec, pattern: TrafficPattern):
    """Execute one atomic action; returns (next SdmState, reward, TaskKind)."""
    o, d, L, t = action.origin, action.destination, state.L, state.epoch
    pool = state.cars.counts[o, : L + 1]
    nonzero = np.flatnonzero(pool)
    if nonzero.size == 0:
        raise InfeasibleActionError(f"epoch {t}: no available car within {L} minutes of region {o}")
    eta = int(nonzero[0])

    nxt = state.copy()
    nxt.cars.counts[o, eta] -= 1
    if nxt.passengers.counts[o, d] > 0:
        nxt.passengers.counts[o, d] -= 1
        nxt.cars.counts[d, eta + pattern.durations(t)[o, d]] += 1
        return nxt, rewards.match_reward(t, o, d, eta), TaskKind.MATCH
    if eta == 0 and d != o:
        nxt.cars.counts[d, pattern.durations(t)[o, d]] += 1
        return nxt, -rewards.empty_route_cost(t, o, d), TaskKind.EMPTY_ROUTE
    nxt.do_nothing[o, eta] += 1
    return nxt, 0.0, TaskKind.DO_NOTHING


def sample_action(dist: np.ndarray, rng: np.random.Generator) -> AtomicAction:
    """Inverse-CDF draw over the R*R trips; zero-probability entries are never returned."""
    cdf = np.cumsum(dist)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    idx = min(idx, int(np.flatnonzero(dist)[-1]))
    return AtomicAction.from_index(idx, math.isqrt(dist.shape[0]))


def check_distribution(dist: np.ndarray, state: SdmState) -> None:
    mask = feasible_mask(state)
    if dist.shape != mask.shape:
        raise InfeasibleActionError(f"policy returned {dist.shape[0]} probabilities, expected {mask.shape[0]}")
    if np.any(dist[~mask] > 0.0):
        bad = int(np.flatnonzero((dist > 0.0) & ~mask)[0])
        raise InfeasibleActionError(f"epoch {state.epoch}: positive probability on infeasible trip {bad}")
    if abs(dist.sum() - 1.0) > 1e-9:
        raise InfeasibleActionError(f"epoch {state.epoch}: probabilities sum to {dist.sum()}")


def run_epoch(
    state: SystemState,
    policy: Policy,
    rewards: RewardSpec,
    pattern: TrafficPattern,
    rng: np.random.Generator,
    snapshot: Callable[[SdmState], Any] | None = None,
):
    """Drive the SDM process for epoch t and advance to t+1; returns (records, next state)."""
    sdm = SdmState.start(state, pattern.L)
    records = []
    for step in range(available_car_count(sdm)):
        dist = policy.distribution(sdm)
        check_distribution(dist, sdm)
        action = sample_action(dist, rng)
        observation = snapshot(sdm) if snapshot else sdm
        prob = float(dist[action.index(pattern.R)])
        sdm, reward, kind = apply_atomic(sdm, action, rewards, pattern)
        records.append(StepRecord(state.epoch, step, action, kind, reward, prob, observation))
    return records, advance_time(sdm, pattern, rng)


@dataclass
class EpisodeResult:
    records: list[StepRecord]
    epoch_starts: list[Any]   # snapshot of s_{t,1} for t = 1..H
    total_requests: int
    fulfilled: int
    total_reward: float

    @property
    def fulfilled_fraction(self) -> float:
        # 0/0 is reported as full service; callers warn about it
        return self.fulfilled / self.total_requests if self.total_requests else 1.0


def run_episode(
    policy: Policy,
    pattern: TrafficPattern,
    rewards: RewardSpec,
    rng: np.random.Generator,
    snapshot: Callable[[SdmState], Any] | None = None,
) -> EpisodeResult:
    state = reset(pattern, rng)
    records, starts = [], []
    requests = 0
    while not state.is_terminal(pattern.H):
        requests += state.passengers.total()
        start = SdmState.start(state, pattern.L)
        starts.append(snapshot(start) if snapshot else start)
        epoch_records, state = run_epoch(state, policy, rewards, pattern, rng, snapshot)
        records.extend(epoch_records)
    fulfilled = sum(r.kind is TaskKind.MATCH for r in records)
    return EpisodeResult(records, starts, requests, fulfilled, float(sum(r.reward for r in records)))
