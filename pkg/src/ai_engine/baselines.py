"""
Reference policies used for comparisons: uniform over feasible trips, and a
myopic matcher that serves the largest waiting queue it can reach.
"""
import numpy as np

from src.env.state import SdmState
from src.sdm.engine import AtomicAction, feasible_mask, feasible_origins, sample_action


def _random_distribution(state: SdmState) -> np.ndarray:
    mask = feasible_mask(state).astype(np.float64)
    return mask / mask.sum()


def _greedy_index(state: SdmState) -> int:
    R = state.R
    reachable = np.repeat(feasible_origins(state), R)
    waiting = np.where(reachable, state.passengers.counts.ravel(), 0)
    if waiting.max() > 0:
        # argmax returns the first maximum, i.e. the lowest flat index on ties
        return int(np.argmax(waiting))
    o = int(np.flatnonzero(feasible_origins(state))[0])
    return o * R + o


def random_feasible_policy(state: SdmState, rng: np.random.Generator) -> AtomicAction:
    return sample_action(_random_distribution(state), rng)


def greedy_matching_policy(state: SdmState, rng: np.random.Generator | None = None) -> AtomicAction:
    """Trip with the most waiting passengers among reachable origins, else stay put at the first reachable origin."""
    return AtomicAction.from_index(_greedy_index(state), state.R)


class RandomFeasiblePolicy:
    name = "random"

    def distribution(self, state: SdmState) -> np.ndarray:
        return _random_distribution(state)


class GreedyMatchingPolicy:
    name = "greedy"

    def distribution(self, state: SdmState) -> np.ndarray:
        dist = np.zeros(state.R * state.R)
        dist[_greedy_index(state)] = 1.0
        return dist


BASELINES = {"random": RandomFeasiblePolicy, "greedy": GreedyMatchingPolicy}
