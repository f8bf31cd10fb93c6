import os

# keep test runs from writing system.log into the repository
os.environ.setdefault("RIDEHAIL_LOG_FILE", "")

import numpy as np
import pytest

from src.env.pattern import TrafficBlock, TrafficPattern
from src.infra.ingest import load_pattern_bundle, resolve_preset


def make_pattern(lam, P, tau, H=3, L=1, N=1, name="toy") -> TrafficPattern:
    block = TrafficBlock(1, H, np.asarray(lam, dtype=float), np.asarray(P, dtype=float), np.asarray(tau, dtype=np.int64))
    return TrafficPattern(name, len(lam), H, L, N, (block,))


@pytest.fixture
def two_region_toy():
    """2 regions, 1 car, 3 epochs, L=1; small enough for exhaustive enumeration."""
    return make_pattern(lam=[0.5, 0.3], P=[[0.4, 0.6], [0.7, 0.3]], tau=[[2, 3], [3, 2]], H=3, L=1, N=1)


@pytest.fixture
def one_car_toy():
    return make_pattern(lam=[0.8, 0.4], P=[[0.5, 0.5], [0.5, 0.5]], tau=[[2, 2], [2, 2]], H=2, L=1, N=1, name="one-car")


@pytest.fixture
def small_fleet_toy():
    """3 regions, 6 cars, 20 epochs; used by training and property tests."""
    return make_pattern(
        lam=[1.0, 0.6, 0.4],
        P=[[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.5, 0.4, 0.1]],
        tau=[[3, 4, 5], [4, 3, 4], [5, 4, 3]],
        H=20, L=2, N=6, name="small-fleet",
    )


@pytest.fixture
def zero_demand_toy():
    return make_pattern(lam=[0.0, 0.0, 0.0], P=np.full((3, 3), 1 / 3), tau=np.full((3, 3), 4), H=4, L=2, N=3,
                        name="zero-demand")


@pytest.fixture(scope="session")
def didi5():
    return load_pattern_bundle(resolve_preset("didi5"))


@pytest.fixture(scope="session")
def didi5_small():
    return load_pattern_bundle(resolve_preset("didi5-small"))
