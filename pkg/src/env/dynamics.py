"""
Between-epoch dynamics: passenger arrivals, fleet initialization, time advance.
"""
import itertools

import numpy as np
from scipy import stats

from src.env.pattern import TrafficPattern
from src.env.state import CarsStatus, PassengersStatus, SdmState, SystemState


def sample_arrivals(pattern: TrafficPattern, t: int, rng: np.random.Generator) -> PassengersStatus:
    """Poisson arrivals per origin, thinned over destinations by P[t][o]."""
    lam = pattern.arrival_rates(t)
    P = pattern.destination_probs(t)
    counts = np.zeros((pattern.R, pattern.R), dtype=np.int64)
    for o in range(pattern.R):
        n = rng.poisson(lam[o])
        if n:
            counts[o] = rng.multinomial(n, P[o])
    return PassengersStatus(counts)


def allocate_fleet(weights: np.ndarray, N: int) -> np.ndarray:
    """Largest-remainder split of N cars in proportion to `weights`."""
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        weights = np.ones_like(weights)
        total = weights.sum()
    quotas = N * weights / total
    alloc = np.floor(quotas).astype(np.int64)
    remainders = quotas - alloc
    # ties go to the lower region index
    order = sorted(range(len(weights)), key=lambda o: (-remainders[o], o))
    for o in order[: N - int(alloc.sum())]:
        alloc[o] += 1
    return alloc


def initial_state(pattern: TrafficPattern) -> SystemState:
    """All N cars idle, spread in proportion to whole-day demand; no passengers yet."""
    cars = CarsStatus.empty(pattern.R, pattern.eta_cap)
    cars.counts[:, 0] = allocate_fleet(pattern.daily_demand(), pattern.N)
    return SystemState(1, cars, PassengersStatus.empty(pattern.R))


def reset(pattern: TrafficPattern, rng: np.random.Generator) -> SystemState:
    """Start of a working day: initial fleet plus the first minute's requests."""
    state = initial_state(pattern)
    state.passengers = sample_arrivals(pattern, 1, rng)
    return state


def release_and_age(final: SdmState) -> CarsStatus:
    """Merge do-nothing cars back into the pool and move every car one minute closer."""
    merged = final.cars.counts.copy()
    merged[:, : final.L + 1] += final.do_nothing
    aged = np.zeros_like(merged)
    aged[:, 0] = merged[:, 0] + merged[:, 1]
    aged[:, 1:-1] = merged[:, 2:]
    return CarsStatus(aged)


def advance_time(final: SdmState, pattern: TrafficPattern, rng: np.random.Generator) -> SystemState:
    """Transition to epoch t+1; unmatched requests leave, fresh ones arrive."""
    cars = release_and_age(final)
    t_next = final.epoch + 1
    if t_next > pattern.H:
        return SystemState(t_next, cars, PassengersStatus.empty(pattern.R))
    return SystemState(t_next, cars, sample_arrivals(pattern, t_next, rng))


def truncated_arrival_support(pattern: TrafficPattern, t: int, max_per_origin: int = 1):
    """
    Finite arrival distribution for epoch t: per-origin Poisson counts truncated
    to 0..max_per_origin (renormalized), destinations multinomial in P[t][o].
    Returns a list of (PassengersStatus, probability) with probabilities summing to 1.
    """
    lam = pattern.arrival_rates(t)
    P = pattern.destination_probs(t)
    R = pattern.R
    per_origin = []
    for o in range(R):
        ks = np.arange(max_per_origin + 1)
        pk = stats.poisson.pmf(ks, lam[o])
        pk = pk / pk.sum()
        outcomes = []
        for k in ks:
            if pk[k] == 0.0:
                continue
            for row in itertools.product(range(k + 1), repeat=R):
                if sum(row) != k:
                    continue
                p = pk[k] * (stats.multinomial.pmf(row, n=k, p=P[o]) if k else 1.0)
                if p > 0.0:
                    outcomes.append((np.array(row, dtype=np.int64), float(p)))
        per_origin.append(outcomes)

    support = []
    for combo in itertools.product(*per_origin):
        counts = np.stack([row for row, _ in combo])
        prob = float(np.prod([p for _, p in combo]))
        support.append((PassengersStatus(counts), prob))
    return support
