import numpy as np

from conftest import make_pattern
from src.ai_engine.baselines import (
    GreedyMatchingPolicy,
    RandomFeasiblePolicy,
    greedy_matching_policy,
    random_feasible_policy,
)
from src.env.pattern import RewardSpec
from src.env.state import CarsStatus, PassengersStatus, SdmState
from src.sdm.engine import AtomicAction, TaskKind, feasible_mask, run_episode


def blank(pattern, epoch=1):
    return SdmState(epoch, CarsStatus.empty(pattern.R, pattern.eta_cap), PassengersStatus.empty(pattern.R),
                    np.zeros((pattern.R, pattern.L + 1), dtype=np.int64))


def test_single_feasible_action():
    pattern = make_pattern(lam=[1.0], P=[[1.0]], tau=[[3]], H=2, L=1, N=1)
    state = blank(pattern)
    state.cars.counts[0, 1] = 1
    rng = np.random.default_rng(0)
    assert random_feasible_policy(state, rng) == AtomicAction(0, 0)
    assert greedy_matching_policy(state, rng) == AtomicAction(0, 0)


def test_random_policy_is_uniform_over_feasible(didi5):
    state = blank(didi5.pattern)
    state.cars.counts[1, 0] = 3
    state.cars.counts[4, 2] = 1
    rng = np.random.default_rng(1)
    counts = np.zeros(25)
    for _ in range(100_000):
        counts[random_feasible_policy(state, rng).index(5)] += 1
    mask = feasible_mask(state)
    assert counts[~mask].sum() == 0
    freq = counts[mask] / counts.sum()
    assert np.all((freq > 0.09) & (freq < 0.11))


def test_greedy_serves_waiting_passenger(didi5):
    state = blank(didi5.pattern)
    state.cars.counts[1, 0] = 1
    state.passengers.counts[1, 3] = 1
    assert greedy_matching_policy(state) == AtomicAction(1, 3)


def test_greedy_without_passengers_stays_put(didi5):
    state = blank(didi5.pattern)
    state.cars.counts[3, 1] = 1
    state.cars.counts[2, 4] = 1
    state.passengers.counts[0, 1] = 5
    assert greedy_matching_policy(state) == AtomicAction(2, 2)


def test_greedy_picks_largest_reachable_queue(small_fleet_toy):
    rng = np.random.default_rng(2)
    policy = GreedyMatchingPolicy()
    for _ in range(2000):
        state = blank(small_fleet_toy)
        state.cars.counts[:, :3] = rng.integers(0, 2, size=(3, 3))
        state.cars.counts[int(rng.integers(3)), 0] = 1
        state.passengers.counts[:] = rng.integers(0, 4, size=(3, 3))
        dist = policy.distribution(state)
        assert dist.sum() == 1.0
        choice = int(np.argmax(dist))
        mask = feasible_mask(state)
        assert mask[choice]
        waiting = state.passengers.counts.ravel()
        assert waiting[choice] == waiting[mask].max()


def test_greedy_never_routes_empty(small_fleet_toy):
    result = run_episode(GreedyMatchingPolicy(), small_fleet_toy, RewardSpec.constant(small_fleet_toy),
                         np.random.default_rng(3))
    assert all(r.kind is not TaskKind.EMPTY_ROUTE for r in result.records)


def test_random_policy_distribution_sums_to_one(small_fleet_toy):
    state = blank(small_fleet_toy)
    state.cars.counts[0, 0] = 1
    dist = RandomFeasiblePolicy().distribution(state)
    assert dist.sum() == 1.0
    assert np.all(dist[~feasible_mask(state)] == 0.0)
