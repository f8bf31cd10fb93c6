"""
Count-based system states.

Cars are indexed by their *final* destination `d` and total remaining travel
time `eta`. The car table is stored padded to a common width
`pattern.eta_cap + 1`; entries with `eta > tau_max[d] + L` stay zero.
"""
from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class CarsStatus:
    counts: np.ndarray  # (R, eta_cap + 1) int64

    @classmethod
    def empty(cls, R: int, eta_cap: int) -> "CarsStatus":
        return cls(np.zeros((R, eta_cap + 1), dtype=np.int64))

    def copy(self) -> "CarsStatus":
        return CarsStatus(self.counts.copy())

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(eq=False)
class PassengersStatus:
    counts: np.ndarray  # (R, R) int64, waiting requests o -> d

    @classmethod
    def empty(cls, R: int) -> "PassengersStatus":
        return cls(np.zeros((R, R), dtype=np.int64))

    def copy(self) -> "PassengersStatus":
        return PassengersStatus(self.counts.copy())

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(eq=False)
class SystemState:
    epoch: int
    cars: CarsStatus
    passengers: PassengersStatus

    def is_terminal(self, H: int) -> bool:
        return self.epoch > H


@dataclass(eq=False)
class SdmState:
    """A state inside one epoch's sequential decision process."""
    epoch: int
    cars: CarsStatus
    passengers: PassengersStatus
    do_nothing: np.ndarray  # (R, L + 1) int64

    @classmethod
    def start(cls, state: SystemState, L: int) -> "SdmState":
        R = state.cars.counts.shape[0]
        return cls(
            state.epoch,
            state.cars.copy(),
            state.passengers.copy(),
            np.zeros((R, L + 1), dtype=np.int64),
        )

    @property
    def L(self) -> int:
        return self.do_nothing.shape[1] - 1

    @property
    def R(self) -> int:
        return self.do_nothing.shape[0]

    def copy(self) -> "SdmState":
        return SdmState(self.epoch, self.cars.copy(), self.passengers.copy(), self.do_nothing.copy())

    def fleet_size(self) -> int:
        return self.cars.total() + int(self.do_nothing.sum())

    def key(self) -> tuple:
        """Hashable identity of the state, used for memoized enumeration."""
        return (
            self.epoch,
            self.cars.counts.tobytes(),
            self.passengers.counts.tobytes(),
            self.do_nothing.tobytes(),
        )
