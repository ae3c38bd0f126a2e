"""Discrete-time consensus with dual-rate sampling and its compact error form.

Agents communicate every ``delta_c`` seconds and sample their references
every ``delta_s`` seconds through a zero-order hold. Weights are frozen at
each communication instant for the whole step.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from active_consensus import analysis
from active_consensus.ct_sim import Trajectory
from active_consensus.errors import (
    HorizonError,
    InvalidInputError,
    NonFiniteStateError,
    UnstableStepError,
)
from active_consensus.graph import SpectralDecomposition, Topology, spectral_decomposition
from active_consensus.schedule import TIME_EPS, ModeSchedule, nudge
from active_consensus.signals import ReferenceEnsemble, weighted_average, weighted_disagreement

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DtState:
    """State at communication step ``k``; ``x = z + eta(k) * r(k)``."""

    k: int
    x: np.ndarray
    z: np.ndarray
    v: np.ndarray


@dataclass(frozen=True, eq=False)
class DtScenario:
    topology: Topology
    schedule: ModeSchedule
    ensemble: ReferenceEnsemble
    delta_c: float
    delta_s: float
    steps: int

    def __post_init__(self) -> None:
        if self.schedule.n != self.topology.n:
            raise InvalidInputError("schedule and topology sizes differ")
        self.ensemble.check_size(self.topology.n)
        if not self.delta_c > 0 or not self.delta_s > 0:
            raise InvalidInputError("communication and sampling periods must be positive")
        if self.steps < 0:
            raise InvalidInputError("step count must be non-negative")
        if self.schedule.departures:
            raise InvalidInputError("discrete-time scenarios do not support agent departures")
        horizon = self.schedule.horizon_end
        if self.steps * self.delta_c > horizon * (1 + TIME_EPS) + TIME_EPS:
            raise HorizonError(
                f"{self.steps} steps of {self.delta_c} s exceed the schedule horizon {horizon} s"
            )

    @property
    def n(self) -> int:
        return self.topology.n

    def time(self, k: int) -> float:
        """Communication instant ``t^c_k`` in seconds."""
        return k * self.delta_c

    def _lookup(self, k: int) -> float:
        return min(nudge(self.time(k)), self.schedule.horizon_end)

    @cached_property
    def decomposition(self) -> SpectralDecomposition:
        return spectral_decomposition(self.topology)

    @cached_property
    def subsystems(self) -> "_SubsystemCache":
        """Compact-form subsystems keyed by weight pattern."""
        return _SubsystemCache(self.decomposition)

    @cached_property
    def _weights(self) -> np.ndarray:
        return np.array([self.schedule.weights_at(self._lookup(k)) for k in range(self.steps + 1)])

    @cached_property
    def _references(self) -> np.ndarray:
        return np.array([self.ensemble.sampled(self.delta_s, self._lookup(k)) for k in range(self.steps + 1)])

    def _check_step_index(self, k: int) -> None:
        if not 0 <= k <= self.steps:
            raise HorizonError(f"step {k} outside 0..{self.steps}")

    def weights(self, k: int) -> np.ndarray:
        """``eta(k)``, the weights in force at ``t^c_k``."""
        self._check_step_index(k)
        return self._weights[k]

    def references(self, k: int) -> np.ndarray:
        """Zero-order-held references ``r(k)`` at ``t^c_k``."""
        self._check_step_index(k)
        return self._references[k]

    def average(self, k: int) -> float:
        return weighted_average(self.weights(k), self.references(k))

    def disagreement(self, k: int) -> np.ndarray:
        return weighted_disagreement(self.weights(k), self.references(k))

    def input_increment(self, k: int) -> np.ndarray:
        """``[dEr(k) - d_avg(k) 1; -dw(k)]`` between steps ``k`` and ``k + 1``."""
        self._check_step_index(k + 1)
        product = self.weights(k + 1) * self.references(k + 1) - self.weights(k) * self.references(k)
        delta_avg = self.average(k + 1) - self.average(k)
        delta_w = self.disagreement(k + 1) - self.disagreement(k)
        return np.concatenate([product - delta_avg, -delta_w])

    def weight_set(self) -> List[np.ndarray]:
        """Distinct weight vectors seen at the communication instants."""
        distinct: List[np.ndarray] = []
        for eta in self._weights:
            if not any(np.array_equal(eta, known) for known in distinct):
                distinct.append(eta)
        return distinct

    def step_limit(self) -> analysis.StepLimit:
        return analysis.step_limits(self.decomposition, self.weight_set())

    def check_step(self, allow_unstable: bool = False) -> float:
        """Compare ``delta_c`` with ``d_bar``; returns ``d_bar``.

        Raises:
            UnstableStepError: If ``delta_c >= d_bar`` and ``allow_unstable`` is false
        """
        d_bar = self.step_limit().value
        if self.delta_c >= d_bar:
            if not allow_unstable:
                raise UnstableStepError(self.delta_c, d_bar)
            logger.warning(
                "running with delta_c=%g >= d_bar=%g; the error dynamics are not Schur", self.delta_c, d_bar
            )
        return d_bar


def initial_state(scenario: DtScenario, x0: np.ndarray, v0: Optional[np.ndarray] = None) -> DtState:
    """Build ``DtState`` at ``k = 0`` with ``z(0) = x0 - eta(0) * r(0)``."""
    n = scenario.n
    x = np.array(x0, dtype=float)
    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    if x.shape != (n,) or v.shape != (n,):
        raise InvalidInputError(f"initial states must have length {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise InvalidInputError("initial states must be finite")
    z = x - scenario.weights(0) * scenario.references(0)
    return DtState(0, x, z, v)


def step(scenario: DtScenario, state: DtState) -> DtState:
    """Advance one communication period."""
    k = state.k
    if k >= scenario.steps:
        raise HorizonError(f"step {k} is the last of {scenario.steps}")
    lap = scenario.topology.laplacian
    delta = scenario.delta_c
    eta = scenario.weights(k)
    r = scenario.references(k)

    coupling = lap @ state.x
    z = state.z - delta * eta * (state.x - r) - delta * coupling - delta * (lap @ state.v)
    v = state.v + delta * coupling
    x = z + scenario.weights(k + 1) * scenario.references(k + 1)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise NonFiniteStateError("state became non-finite", time=scenario.time(k + 1), step=k + 1)
    return DtState(k + 1, x, z, v)


def simulate(scenario: DtScenario, x0: np.ndarray, v0: Optional[np.ndarray] = None) -> Trajectory:
    """Run all ``scenario.steps`` steps from ``(x0, v0)``."""
    state = initial_state(scenario, x0, v0)
    states = [state]
    for _ in range(scenario.steps):
        state = step(scenario, state)
        states.append(state)

    steps = np.arange(scenario.steps + 1)
    x = np.array([s.x for s in states])
    avg = np.array([scenario.average(k) for k in steps])
    logger.debug("simulated %d steps of %g s", scenario.steps, scenario.delta_c)
    return Trajectory(
        times=steps * scenario.delta_c,
        x=x,
        v=np.array([s.v for s in states]),
        avg=avg,
        errors=np.abs(x - avg[:, None]),
        switch_rows=np.zeros(0, dtype=int),
        left_avg=np.zeros(0),
        left_errors=np.zeros((0, scenario.n)),
        steps=steps,
        z=np.array([s.z for s in states]),
    )


class _SubsystemCache:
    def __init__(self, decomposition: SpectralDecomposition):
        self._decomposition = decomposition
        self._cache: Dict[bytes, analysis.Subsystem] = {}

    def get(self, weights: np.ndarray) -> analysis.Subsystem:
        key = np.asarray(weights, dtype=float).tobytes()
        if key not in self._cache:
            self._cache[key] = analysis.subsystem_matrix(self._decomposition, weights, len(self._cache))
        return self._cache[key]


def compact_state(scenario: DtScenario, x: np.ndarray, v: np.ndarray, k: int) -> Tuple[np.ndarray, float]:
    """Map ``(x, v)`` at step ``k`` to ``(e_bar, q_2..n)`` and return ``q_1`` separately."""
    e_bar, q = analysis.error_coordinates(
        scenario.decomposition, x, v, scenario.average(k), scenario.disagreement(k)
    )
    return np.concatenate([e_bar, q[1:]]), float(q[0])


def compact_step(scenario: DtScenario, state: np.ndarray, k: int) -> np.ndarray:
    """One step of the compact error recursion ``s(k+1) = (I + delta_c A) s + B u``."""
    state = np.asarray(state, dtype=float)
    dimension = 2 * scenario.n - 1
    if state.shape != (dimension,):
        raise InvalidInputError(f"compact state must have length {dimension}")
    subsystem = scenario.subsystems.get(scenario.weights(k))
    drive = subsystem.input_matrix @ scenario.input_increment(k)
    return state + scenario.delta_c * (subsystem.matrix @ state) + drive
