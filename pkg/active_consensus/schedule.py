"""Piecewise-constant agent weights, switching statistics and dwell-time checks."""

import bisect
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from active_consensus.errors import HorizonError, InvalidInputError

logger = logging.getLogger(__name__)

# Relative slack for horizon and sample-instant comparisons.
TIME_EPS = 1e-9


def nudge(t: float) -> float:
    """Move a computed sample instant just past rounding so epoch lookups land right of a switch."""
    return t + TIME_EPS * max(1.0, abs(t))


@dataclass(frozen=True, eq=False)
class Epoch:
    """Weights ``eta`` in force from ``start`` (seconds) until the next epoch."""

    start: float
    weights: np.ndarray


@dataclass(frozen=True)
class Departure:
    """Agent ``agent`` leaves the network at ``time`` seconds."""

    time: float
    agent: int


@dataclass(frozen=True)
class DwellStats:
    """Chatter bound ``N0`` and average dwell time ``tau_D`` (seconds)."""

    chatter_bound: int
    average_dwell: float

    def __post_init__(self) -> None:
        if self.chatter_bound < 0:
            raise InvalidInputError("chatter bound must be non-negative")
        if not self.average_dwell > 0:
            raise InvalidInputError("average dwell time must be positive")


@dataclass(frozen=True)
class DwellVerdict:
    """Outcome of an average dwell-time check."""

    holds: bool
    first_violation: Optional[float] = None


class ModeSchedule:
    """Right-continuous weight indicator ``eta(t)`` over ``[0, horizon_end]``.

    Departed agents are reported with weight zero from their departure time on.
    """

    def __init__(
        self,
        epochs: Sequence[Tuple[float, Sequence[float]]],
        horizon_end: float,
        departures: Sequence[Departure] = (),
    ):
        """Initialize and validate the schedule.

        Args:
            epochs: Ordered ``(start_time, weights)`` pairs, the first starting at 0
            horizon_end: Last time (seconds) the schedule is defined for
            departures: Agents leaving the network, at most one entry per agent
        """
        if not epochs:
            raise InvalidInputError("a schedule needs at least one epoch")
        if not np.isfinite(horizon_end) or horizon_end < 0:
            raise InvalidInputError("horizon end must be finite and non-negative")

        built: List[Epoch] = []
        for start, weights in epochs:
            eta = np.array(weights, dtype=float)
            eta.setflags(write=False)
            built.append(Epoch(float(start), eta))

        n = built[0].weights.shape[0]
        if built[0].start != 0.0:
            raise InvalidInputError("the first epoch must start at t = 0")
        for previous, current in zip(built, built[1:]):
            if not current.start > previous.start:
                raise InvalidInputError("epoch start times must be strictly increasing")
        for epoch in built:
            eta = epoch.weights
            if eta.ndim != 1 or eta.shape[0] != n:
                raise InvalidInputError("every epoch needs one weight per agent")
            if not np.all(np.isfinite(eta)) or np.any(eta < 0):
                raise InvalidInputError(f"weights at t={epoch.start} must be finite and >= 0")
            if not np.any(eta > 0):
                raise InvalidInputError(f"no active agent in the epoch starting at t={epoch.start}")
        if built[-1].start > horizon_end:
            raise InvalidInputError("an epoch starts after the horizon end")

        self._epochs = tuple(built)
        self._starts = [epoch.start for epoch in built]
        self._horizon_end = float(horizon_end)
        self._n = n
        self._departures = tuple(sorted(departures, key=lambda d: d.time))
        self._validate_departures()

    def _validate_departures(self) -> None:
        seen = set()
        for departure in self._departures:
            if not 0 < departure.time <= self._horizon_end:
                raise InvalidInputError("departure times must lie in (0, horizon_end]")
            if not 0 <= departure.agent < self._n:
                raise InvalidInputError(f"departing agent {departure.agent} out of range")
            if departure.agent in seen:
                raise InvalidInputError(f"agent {departure.agent} departs twice")
            seen.add(departure.agent)
        if len(seen) >= self._n - 1 and seen:
            raise InvalidInputError("at least two agents must remain in the network")
        for time in {d.time for d in self._departures} | set(self._starts):
            if time > self._horizon_end:
                continue
            if not np.any(self.weights_at(time) > 0):
                raise InvalidInputError(f"no active agent remains at t={time}")

    @property
    def n(self) -> int:
        return self._n

    @property
    def epochs(self) -> Tuple[Epoch, ...]:
        return self._epochs

    @property
    def horizon_end(self) -> float:
        return self._horizon_end

    @property
    def departures(self) -> Tuple[Departure, ...]:
        return self._departures

    @property
    def switch_times(self) -> np.ndarray:
        """Switch instants ``t_1 < t_2 < ...`` (epoch boundaries after ``t_0 = 0``)."""
        return np.array(self._starts[1:], dtype=float)

    @property
    def min_epoch_length(self) -> float:
        edges = self._starts + [self._horizon_end]
        lengths = [b - a for a, b in zip(edges, edges[1:]) if b > a]
        return min(lengths) if lengths else self._horizon_end

    def _check_time(self, t: float) -> None:
        slack = TIME_EPS * max(1.0, self._horizon_end)
        if not (-slack <= t <= self._horizon_end + slack):
            raise HorizonError(f"t={t} outside schedule horizon [0, {self._horizon_end}]")

    def epoch_index(self, t: float) -> int:
        """Index of the epoch containing ``t`` (right-continuous at switches)."""
        self._check_time(t)
        return max(bisect.bisect_right(self._starts, t) - 1, 0)

    def departed_at(self, t: float) -> List[int]:
        """Agents that have left the network by time ``t``."""
        return [d.agent for d in self._departures if d.time <= t]

    def alive_at(self, t: float) -> np.ndarray:
        """Indices of agents still in the network at ``t``."""
        gone = set(self.departed_at(t))
        return np.array([i for i in range(self._n) if i not in gone], dtype=int)

    def weights_at(self, t: float) -> np.ndarray:
        """Weight vector ``eta(t)`` with departed agents zeroed."""
        eta = self._epochs[self.epoch_index(t)].weights
        gone = self.departed_at(t)
        if gone:
            eta = eta.copy()
            eta[gone] = 0.0
        return eta

    def weights_before(self, t: float) -> np.ndarray:
        """Left limit ``eta(t-)``; equals :meth:`weights_at` away from switches."""
        self._check_time(t)
        index = max(bisect.bisect_left(self._starts, t) - 1, 0)
        eta = self._epochs[index].weights
        gone = [d.agent for d in self._departures if d.time < t]
        if gone:
            eta = eta.copy()
            eta[gone] = 0.0
        return eta

    def active_set(self, t: float) -> frozenset:
        """``{i : eta_i(t) > 0}``; never empty for a valid schedule."""
        return frozenset(int(i) for i in np.flatnonzero(self.weights_at(t) > 0))

    def switch_count(self, t: float) -> int:
        """Number of switches ``N_sigma(0, t)`` in the open interval ``(0, t)``."""
        self._check_time(t)
        return bisect.bisect_left(self._starts, t) - 1 if t > 0 else 0

    def weight_set(self) -> List[np.ndarray]:
        """Distinct weight vectors used by the schedule, in order of first use."""
        distinct: List[np.ndarray] = []
        for epoch in self._epochs:
            if not any(np.array_equal(epoch.weights, known) for known in distinct):
                distinct.append(epoch.weights)
        return distinct

    def mode_index(self, t: float) -> int:
        """Switching signal ``sigma(t)`` as an index into :meth:`weight_set`."""
        eta = self._epochs[self.epoch_index(t)].weights
        for index, known in enumerate(self.weight_set()):
            if np.array_equal(eta, known):
                return index
        raise AssertionError("epoch weights missing from weight set")

    def epoch_bounds(self, t_end: Optional[float] = None) -> List[Tuple[float, float, Epoch]]:
        """``(start, stop, epoch)`` for every epoch overlapping ``[0, t_end]``."""
        stop_at = self._horizon_end if t_end is None else t_end
        edges = self._starts + [np.inf]
        bounds = []
        for epoch, nxt in zip(self._epochs, edges[1:]):
            if epoch.start > stop_at:
                break
            bounds.append((epoch.start, min(nxt, stop_at), epoch))
        return bounds

    def without_departures(self) -> "ModeSchedule":
        return ModeSchedule(
            [(e.start, e.weights) for e in self._epochs], self._horizon_end
        )

    def __repr__(self) -> str:
        return (
            f"ModeSchedule(n={self._n}, epochs={len(self._epochs)}, "
            f"horizon_end={self._horizon_end}, departures={len(self._departures)})"
        )


def verify_dwell(schedule: ModeSchedule, stats: DwellStats) -> DwellVerdict:
    """Check ``N_sigma(0, t) <= N0 + t / tau_D`` on ``[0, horizon_end]``.

    ``N_sigma`` is a step function and the right-hand side increases with
    ``t``, so the inequality only needs checking just after each switch,
    where ``N_sigma(0, t_k+) = k``.
    """
    for k, t_k in enumerate(schedule.switch_times, start=1):
        allowed = stats.chatter_bound + t_k / stats.average_dwell
        if k > allowed + 1e-12:
            logger.info("dwell bound violated at t=%s (k=%d > %.6g)", t_k, k, allowed)
            return DwellVerdict(False, float(t_k))
    return DwellVerdict(True)
