"""Continuous-time simulation by fixed-step RK4 aligned to switch times."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from active_consensus.errors import HorizonError, InvalidInputError, NonFiniteStateError
from active_consensus.graph import Topology
from active_consensus.schedule import TIME_EPS, ModeSchedule
from active_consensus.signals import (
    ReferenceEnsemble,
    active_average,
    uncovered_breakpoints,
    weighted_average,
)

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-2


@dataclass(frozen=True, eq=False)
class CtState:
    t: float
    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled simulation record with strictly increasing ``times``.

    Rows listed in ``switch_rows`` sit at switch times and hold the
    right-continuous average; the matching left limits are kept in
    ``left_avg`` and ``left_errors``. Columns of departed agents are NaN.
    Discrete runs also carry the step indices and the internal states ``z``.
    """

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    avg: np.ndarray
    errors: np.ndarray
    switch_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    left_avg: np.ndarray = field(default_factory=lambda: np.zeros(0))
    left_errors: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    steps: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.times.size

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def max_error(self) -> np.ndarray:
        """Largest tracking error over the agents still in the network, per sample."""
        return np.nanmax(self.errors, axis=1)

    @property
    def final_state(self) -> CtState:
        return CtState(float(self.times[-1]), self.x[-1].copy(), self.v[-1].copy())

    def conservation_drift(self) -> float:
        """``|sum v(T) - sum v(0)|``; departed agents count with their last recorded value."""
        final = self.v[-1].copy()
        for i in np.flatnonzero(np.isnan(final)):
            recorded = self.v[~np.isnan(self.v[:, i]), i]
            final[i] = recorded[-1] if recorded.size else self.v[0, i]
        return float(abs(final.sum() - self.v[0].sum()))


@dataclass(frozen=True)
class TrackingError:
    per_agent: np.ndarray
    max_error: np.ndarray


class _Network:
    """Laplacians of the network after each set of departures, embedded in ``n x n``."""

    def __init__(self, topology: Topology):
        self._topology = topology
        self._cache: Dict[Tuple[int, ...], np.ndarray] = {(): topology.laplacian}

    def laplacian(self, departed: Sequence[int]) -> np.ndarray:
        key = tuple(sorted(departed))
        if key not in self._cache:
            remaining = self._topology.without(key)
            keep = [i for i in range(self._topology.n) if i not in key]
            full = np.zeros((self._topology.n, self._topology.n))
            full[np.ix_(keep, keep)] = remaining.laplacian
            logger.info("agents %s left the network; %d remain", list(key), len(keep))
            self._cache[key] = full
        return self._cache[key]


def _field(
    lap: np.ndarray,
    eta: np.ndarray,
    r: np.ndarray,
    r_dot: np.ndarray,
    x: np.ndarray,
    v: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    active = eta > 0
    tracking = np.zeros_like(x)
    tracking[active] = eta[active] * (x[active] - r[active] - r_dot[active])
    # eta * (x - r) - eta * r_dot folded into one masked term
    x_dot = -tracking - lap @ x - lap @ v
    return x_dot, lap @ x


def vector_field(
    topology: Topology,
    schedule: ModeSchedule,
    ensemble: ReferenceEnsemble,
    state: CtState,
) -> Tuple[np.ndarray, np.ndarray]:
    """Right-hand side ``(x', v')`` of the consensus dynamics at ``state``."""
    lap = _Network(topology).laplacian(schedule.departed_at(state.t))
    return _field(
        lap,
        schedule.weights_at(state.t),
        ensemble.values(state.t),
        ensemble.derivatives(state.t),
        np.asarray(state.x, dtype=float),
        np.asarray(state.v, dtype=float),
    )


def rk4_step(
    rhs: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, h: float
) -> np.ndarray:
    """Classical four-stage Runge-Kutta step."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _segment_edges(schedule: ModeSchedule, ensemble: ReferenceEnsemble, t_end: float) -> List[float]:
    points = [0.0, t_end]
    points.extend(float(t) for t in schedule.switch_times if 0 < t < t_end)
    points.extend(d.time for d in schedule.departures if 0 < d.time < t_end)
    points.extend(ensemble.breakpoints(t_end))
    edges: List[float] = []
    for point in sorted(points):
        if not edges or point - edges[-1] > TIME_EPS * max(1.0, point):
            edges.append(point)
    edges[-1] = t_end
    return edges


def _substeps(start: float, stop: float, h: float) -> np.ndarray:
    count = max(1, math.ceil((stop - start) / h - TIME_EPS))
    points = start + (stop - start) * np.arange(1, count + 1) / count
    points[-1] = stop
    return points


def time_grid(schedule: ModeSchedule, ensemble: ReferenceEnsemble, t_end: float, h: float) -> np.ndarray:
    """Step boundaries used by :func:`integrate`; every switch time is one of them."""
    if not h > 0:
        raise InvalidInputError("step size must be positive")
    if t_end <= 0:
        return np.zeros(1)
    edges = _segment_edges(schedule, ensemble, t_end)
    parts = [np.zeros(1)] + [_substeps(a, b, h) for a, b in zip(edges, edges[1:])]
    return np.concatenate(parts)


def _check_initial(n: int, x0: np.ndarray, v0: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.array(x0, dtype=float)
    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    if x.shape != (n,) or v.shape != (n,):
        raise InvalidInputError(f"initial states must have length {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise InvalidInputError("initial states must be finite")
    return x, v


def integrate(
    topology: Topology,
    schedule: ModeSchedule,
    ensemble: ReferenceEnsemble,
    x0: np.ndarray,
    v0: Optional[np.ndarray],
    t_end: float,
    h: float = DEFAULT_STEP,
) -> Trajectory:
    """Integrate the consensus dynamics on ``[0, t_end]``.

    The step sequence is uniform within each interval between switch,
    departure and signal breakpoints and lands exactly on each of them.
    Weights and the active network are frozen at the start of each interval.

    Args:
        topology: Communication graph
        schedule: Weight schedule, including departures
        ensemble: Reference signals
        x0: Initial agreement states
        v0: Initial integral states (zeros if None)
        t_end: Final time in seconds
        h: Nominal step size in seconds

    Returns:
        Trajectory sampled at every step boundary

    Raises:
        NonFiniteStateError: If the state becomes NaN or infinite
    """
    n = topology.n
    if schedule.n != n:
        raise InvalidInputError("schedule and topology sizes differ")
    ensemble.check_size(n)
    if not h > 0:
        raise InvalidInputError("step size must be positive")
    if t_end < 0 or t_end > schedule.horizon_end * (1 + TIME_EPS) + TIME_EPS:
        raise HorizonError(f"t_end={t_end} outside schedule horizon [0, {schedule.horizon_end}]")
    t_end = min(float(t_end), schedule.horizon_end)
    x, v = _check_initial(n, x0, v0)
    if h > schedule.min_epoch_length / 4:
        logger.warning(
            "step %g exceeds a quarter of the shortest epoch (%g s); switches may be under-resolved",
            h,
            schedule.min_epoch_length,
        )

    network = _Network(topology)
    y = np.concatenate([x, v])
    times: List[float] = [0.0]
    states: List[np.ndarray] = [y.copy()]

    if t_end > 0:
        edges = _segment_edges(schedule, ensemble, t_end)
        for start, stop in zip(edges, edges[1:]):
            eta = schedule.weights_at(start)
            lap = network.laplacian(schedule.departed_at(start))
            limit = stop - TIME_EPS * max(1.0, stop)

            def rhs(t: float, y: np.ndarray) -> np.ndarray:
                if t >= limit:
                    r, r_dot = ensemble.left_values(stop), ensemble.left_derivatives(stop)
                else:
                    r, r_dot = ensemble.values(t), ensemble.derivatives(t)
                x_dot, v_dot = _field(lap, eta, r, r_dot, y[:n], y[n:])
                return np.concatenate([x_dot, v_dot])

            previous = start
            for point in _substeps(start, stop, h):
                y = rk4_step(rhs, previous, y, point - previous)
                if not np.all(np.isfinite(y)):
                    raise NonFiniteStateError("state became non-finite", time=float(point))
                times.append(float(point))
                states.append(y.copy())
                previous = point

    return _record(schedule, ensemble, np.asarray(times), np.asarray(states), n)


def _record(
    schedule: ModeSchedule,
    ensemble: ReferenceEnsemble,
    times: np.ndarray,
    states: np.ndarray,
    n: int,
) -> Trajectory:
    x = states[:, :n].copy()
    v = states[:, n:].copy()
    avg = np.array([active_average(ensemble, schedule, t) for t in times])
    errors = np.abs(x - avg[:, None])
    for departure in schedule.departures:
        errors[times >= departure.time, departure.agent] = np.nan
        # the row at the departure instant keeps the final state of the leaving agent
        gone = times > departure.time
        x[gone, departure.agent] = np.nan
        v[gone, departure.agent] = np.nan

    rows, left_avg = [], []
    for t_k in schedule.switch_times:
        if t_k > times[-1] * (1 + TIME_EPS):
            break
        row = int(np.argmin(np.abs(times - t_k)))
        rows.append(row)
        left_avg.append(weighted_average(schedule.weights_before(t_k), ensemble.left_values(t_k)))
    rows_array = np.asarray(rows, dtype=int)
    left = np.asarray(left_avg, dtype=float)
    left_errors = np.abs(x[rows_array] - left[:, None]) if rows else np.zeros((0, n))
    return Trajectory(times, x, v, avg, errors, rows_array, left, left_errors)


def tracking_error(
    trajectory: Trajectory, ensemble: ReferenceEnsemble, schedule: ModeSchedule
) -> TrackingError:
    """Pointwise ``|x_i(t) - avg(t)|`` and its maximum over agents."""
    avg = np.array([active_average(ensemble, schedule, t) for t in trajectory.times])
    per_agent = np.abs(trajectory.x - avg[:, None])
    return TrackingError(per_agent, np.nanmax(per_agent, axis=1))


@dataclass(frozen=True, eq=False)
class CtScenario:
    """Everything a continuous-time run needs besides the initial state."""

    topology: Topology
    schedule: ModeSchedule
    ensemble: ReferenceEnsemble
    step: float = DEFAULT_STEP

    def __post_init__(self) -> None:
        if self.schedule.n != self.topology.n:
            raise InvalidInputError("schedule and topology sizes differ")
        self.ensemble.check_size(self.topology.n)
        if not self.step > 0:
            raise InvalidInputError("step size must be positive")
        for departure in self.schedule.departures:
            # Fails early if a departure disconnects the remaining agents.
            self.topology.without(self.schedule.departed_at(departure.time))
        loose = uncovered_breakpoints(self.ensemble, self.schedule, self.schedule.horizon_end)
        if loose:
            logger.warning(
                "signal discontinuities at t=%s do not coincide with a switch; "
                "the switching term of the error bound does not cover them",
                ", ".join(f"{t:g}" for t in loose[:5]),
            )

    @property
    def horizon(self) -> float:
        return self.schedule.horizon_end

    def integrate(self, x0: np.ndarray, v0: Optional[np.ndarray] = None, t_end: Optional[float] = None) -> Trajectory:
        return integrate(
            self.topology,
            self.schedule,
            self.ensemble,
            x0,
            v0,
            self.horizon if t_end is None else t_end,
            self.step,
        )
