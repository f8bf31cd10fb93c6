"""
Exact value functions on small instances by exhaustive enumeration.

Arrivals are drawn from `truncated_arrival_support`, so every expectation is a
finite sum. Values live on SDM states; a state with no available car left is the
end of its epoch and its value is the expectation over the next epoch's
arrivals (0 after the last epoch).
"""
from src.env.dynamics import release_and_age, truncated_arrival_support
from src.env.pattern import RewardSpec, TrafficPattern
from src.env.state import SdmState, SystemState
from src.sdm.engine import AtomicAction, Policy, apply_atomic, available_car_count, check_distribution


class ExactEvaluator:
    def __init__(self, pattern: TrafficPattern, rewards: RewardSpec, max_per_origin: int = 1):
        self.pattern = pattern
        self.rewards = rewards
        self.max_per_origin = max_per_origin
        self._support = {}
        self._values = {}   # (id(policy),) -> (pinned policies, {state key: value})
        self._sums = {}     # (id(theta), id(xi)) -> (pinned policies, {state key: expected advantage sum})

    def _cache(self, store: dict, *policies) -> dict:
        # each entry keeps its policies alive, so an id cannot be reused while it is cached
        key = tuple(id(p) for p in policies)
        if key not in store:
            store[key] = (policies, {})
        return store[key][1]

    def clear(self) -> None:
        """Forget cached values; needed after a cached policy is changed in place."""
        self._values.clear()
        self._sums.clear()

    def arrivals(self, t: int):
        if t not in self._support:
            self._support[t] = truncated_arrival_support(self.pattern, t, self.max_per_origin)
        return self._support[t]

    def next_epoch_starts(self, state: SdmState):
        """(probability, s_{t+1,1}) pairs for an end-of-epoch state; empty after the last epoch."""
        t_next = state.epoch + 1
        if t_next > self.pattern.H:
            return []
        cars = release_and_age(state)
        return [(p, SdmState.start(SystemState(t_next, cars, arrivals), self.pattern.L))
                for arrivals, p in self.arrivals(t_next)]

    def _moves(self, policy: Policy, state: SdmState):
        dist = policy.distribution(state)
        check_distribution(dist, state)
        for idx in dist.nonzero()[0]:
            action = AtomicAction.from_index(idx, state.R)
            nxt, reward, _ = apply_atomic(state, action, self.rewards, self.pattern)
            yield float(dist[idx]), action, reward, nxt

    def value(self, policy: Policy, state: SdmState) -> float:
        """Expected remaining episode reward from `state` when following `policy`."""
        cache = self._cache(self._values, policy)
        key = state.key()
        if key not in cache:
            if available_car_count(state) == 0:
                v = sum(p * self.value(policy, s) for p, s in self.next_epoch_starts(state))
            else:
                v = sum(p * (r + self.value(policy, nxt)) for p, _, r, nxt in self._moves(policy, state))
            cache[key] = float(v)
        return cache[key]

    def advantage(self, policy: Policy, state: SdmState, action: AtomicAction) -> float:
        nxt, reward, _ = apply_atomic(state, action, self.rewards, self.pattern)
        return reward + self.value(policy, nxt) - self.value(policy, state)

    def expected_advantage_sum(self, theta: Policy, xi: Policy, state: SdmState) -> float:
        """Expectation under theta's trajectories of the summed advantages of xi."""
        cache = self._cache(self._sums, theta, xi)
        key = state.key()
        if key not in cache:
            if available_car_count(state) == 0:
                total = sum(p * self.expected_advantage_sum(theta, xi, s) for p, s in self.next_epoch_starts(state))
            else:
                base = self.value(xi, state)
                total = sum(
                    p * (r + self.value(xi, nxt) - base + self.expected_advantage_sum(theta, xi, nxt))
                    for p, _, r, nxt in self._moves(theta, state)
                )
            cache[key] = float(total)
        return cache[key]

    def performance_difference(self, theta: Policy, xi: Policy, state: SdmState) -> tuple[float, float]:
        """Both sides of V_theta(s) - V_xi(s) = E_theta[sum of A_xi]."""
        lhs = self.value(theta, state) - self.value(xi, state)
        return lhs, self.expected_advantage_sum(theta, xi, state)
