"""Reference signals and the bookkeeping around the active weighted average.

Every signal is right-continuous: ``value(t)`` at a breakpoint returns the new
piece, ``left_value(t)`` the limit from the left.
"""

import bisect
import logging
import math
from abc import ABC, abstractmethod
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial as _NumpyPolynomial

from active_consensus.errors import InvalidInputError
from active_consensus.schedule import TIME_EPS, ModeSchedule

logger = logging.getLogger(__name__)


class ReferenceSignal(ABC):
    """Scalar reference ``r^i(t)`` available to agent ``i`` while it is active."""

    kind: str = ""

    @abstractmethod
    def value(self, t: float) -> float:
        """Signal value at ``t`` (right-continuous)."""

    @abstractmethod
    def derivative(self, t: float) -> float:
        """Time derivative at ``t`` between breakpoints."""

    def left_value(self, t: float) -> float:
        return self.value(t)

    def left_derivative(self, t: float) -> float:
        return self.derivative(t)

    def breakpoints(self, t_end: float) -> List[float]:
        """Discontinuities of the value or the derivative inside ``(0, t_end)``."""
        return []

    @property
    def bounded_derivative(self) -> bool:
        return True


class Constant(ReferenceSignal):
    kind = "constant"

    def __init__(self, value: float):
        if not math.isfinite(value):
            raise InvalidInputError("constant signal must be finite")
        self._value = float(value)

    def value(self, t: float) -> float:
        return self._value

    def derivative(self, t: float) -> float:
        return 0.0

    def __repr__(self) -> str:
        return f"Constant({self._value})"


class Sinusoid(ReferenceSignal):
    """``offset + amplitude * sin(frequency * t + phase)`` with frequency in rad/s."""

    kind = "sinusoid"

    def __init__(self, offset: float, amplitude: float, frequency: float, phase: float = 0.0):
        if not all(math.isfinite(p) for p in (offset, amplitude, frequency, phase)):
            raise InvalidInputError("sinusoid parameters must be finite")
        self.offset = float(offset)
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.phase = float(phase)

    def value(self, t: float) -> float:
        return self.offset + self.amplitude * math.sin(self.frequency * t + self.phase)

    def derivative(self, t: float) -> float:
        return self.amplitude * self.frequency * math.cos(self.frequency * t + self.phase)

    def __repr__(self) -> str:
        return (
            f"Sinusoid(offset={self.offset}, amplitude={self.amplitude}, "
            f"frequency={self.frequency}, phase={self.phase})"
        )


class ZohTrack(ReferenceSignal):
    """Samples held for ``period`` seconds each; the last sample is held forever."""

    kind = "zoh"

    def __init__(self, samples: Sequence[float], period: float):
        values = np.asarray(samples, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise InvalidInputError("a zoh track needs at least one sample")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("zoh samples must be finite")
        if not period > 0:
            raise InvalidInputError("zoh period must be positive")
        self.samples = values
        self.period = float(period)

    def _index(self, t: float) -> int:
        index = int(math.floor(t / self.period + TIME_EPS))
        return min(max(index, 0), self.samples.size - 1)

    def value(self, t: float) -> float:
        return float(self.samples[self._index(t)])

    def left_value(self, t: float) -> float:
        index = int(math.ceil(t / self.period - TIME_EPS)) - 1
        return float(self.samples[min(max(index, 0), self.samples.size - 1)])

    def derivative(self, t: float) -> float:
        return 0.0

    def breakpoints(self, t_end: float) -> List[float]:
        last = min(self.samples.size - 1, int(math.floor(t_end / self.period)))
        points = [l * self.period for l in range(1, last + 1)]
        return [p for p in points if p < t_end]

    def __repr__(self) -> str:
        return f"ZohTrack(samples={self.samples.size}, period={self.period})"


class Polynomial(ReferenceSignal):
    """Polynomial in ``t`` with coefficients in increasing degree."""

    kind = "poly"

    def __init__(self, coefficients: Sequence[float]):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.ndim != 1 or coefficients.size == 0:
            raise InvalidInputError("a polynomial needs at least one coefficient")
        if not np.all(np.isfinite(coefficients)):
            raise InvalidInputError("polynomial coefficients must be finite")
        self._poly = _NumpyPolynomial(coefficients)
        self._deriv = self._poly.deriv()

    @property
    def coefficients(self) -> np.ndarray:
        return self._poly.coef

    def value(self, t: float) -> float:
        return float(self._poly(t))

    def derivative(self, t: float) -> float:
        return float(self._deriv(t))

    @property
    def bounded_derivative(self) -> bool:
        return self._poly.degree() <= 1

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coefficients)})"


class Piecewise(ReferenceSignal):
    """Ordered ``(start_time, signal)`` pieces; the first piece starts at 0.

    Pieces are evaluated in absolute time.
    """

    kind = "piecewise"

    def __init__(self, pieces: Sequence[Tuple[float, ReferenceSignal]]):
        if not pieces:
            raise InvalidInputError("a piecewise signal needs at least one piece")
        starts = [float(start) for start, _ in pieces]
        if starts[0] != 0.0:
            raise InvalidInputError("the first piece must start at t = 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise InvalidInputError("piece start times must be strictly increasing")
        self._starts = starts
        self._signals = [signal for _, signal in pieces]

    @property
    def pieces(self) -> List[Tuple[float, ReferenceSignal]]:
        return list(zip(self._starts, self._signals))

    def _piece(self, t: float) -> ReferenceSignal:
        return self._signals[max(bisect.bisect_right(self._starts, t) - 1, 0)]

    def _left_piece(self, t: float) -> ReferenceSignal:
        return self._signals[max(bisect.bisect_left(self._starts, t) - 1, 0)]

    def value(self, t: float) -> float:
        return self._piece(t).value(t)

    def derivative(self, t: float) -> float:
        return self._piece(t).derivative(t)

    def left_value(self, t: float) -> float:
        return self._left_piece(t).left_value(t)

    def left_derivative(self, t: float) -> float:
        return self._left_piece(t).left_derivative(t)

    def breakpoints(self, t_end: float) -> List[float]:
        points = {s for s in self._starts[1:] if s < t_end}
        edges = self._starts + [math.inf]
        for start, stop, signal in zip(self._starts, edges[1:], self._signals):
            points.update(p for p in signal.breakpoints(min(stop, t_end)) if p > start)
        return sorted(points)

    @property
    def bounded_derivative(self) -> bool:
        return all(signal.bounded_derivative for signal in self._signals)

    def __repr__(self) -> str:
        return f"Piecewise({self.pieces})"


class ReferenceEnsemble:
    """One reference signal per agent."""

    def __init__(self, signals: Iterable[ReferenceSignal]):
        self._signals = tuple(signals)
        if not self._signals:
            raise InvalidInputError("an ensemble needs at least one signal")
        for index, signal in enumerate(self._signals):
            if not signal.bounded_derivative:
                logger.warning(
                    "signal %d (%s) has an unbounded derivative; error bounds grow without limit",
                    index,
                    signal.kind,
                )

    @property
    def n(self) -> int:
        return len(self._signals)

    @property
    def signals(self) -> Tuple[ReferenceSignal, ...]:
        return self._signals

    def __len__(self) -> int:
        return len(self._signals)

    def __getitem__(self, index: int) -> ReferenceSignal:
        return self._signals[index]

    def values(self, t: float) -> np.ndarray:
        return np.array([s.value(t) for s in self._signals])

    def left_values(self, t: float) -> np.ndarray:
        return np.array([s.left_value(t) for s in self._signals])

    def derivatives(self, t: float) -> np.ndarray:
        return np.array([s.derivative(t) for s in self._signals])

    def left_derivatives(self, t: float) -> np.ndarray:
        return np.array([s.left_derivative(t) for s in self._signals])

    def breakpoints(self, t_end: float) -> List[float]:
        """Union of every signal's breakpoints inside ``(0, t_end)``."""
        points = set()
        for signal in self._signals:
            points.update(signal.breakpoints(t_end))
        return sorted(points)

    def sampled(self, delta_s: float, t: float) -> np.ndarray:
        return np.array([zoh_sample(s, delta_s, t) for s in self._signals])

    def check_size(self, n: int) -> None:
        if self.n != n:
            raise InvalidInputError(f"ensemble has {self.n} signals for {n} agents")


def weighted_average(weights: np.ndarray, references: np.ndarray) -> float:
    """``sum(eta * r) / sum(eta)`` over the agents with positive weight."""
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if not total > 0:
        raise InvalidInputError("weighted average needs at least one positive weight")
    active = weights > 0
    return float(weights[active] @ np.asarray(references, dtype=float)[active] / total)


def weighted_disagreement(weights: np.ndarray, references: np.ndarray) -> np.ndarray:
    """``w = E (r - avg 1)``; zero for inactive agents whatever their reference."""
    weights = np.asarray(weights, dtype=float)
    references = np.asarray(references, dtype=float)
    avg = weighted_average(weights, references)
    w = np.zeros_like(weights)
    active = weights > 0
    w[active] = weights[active] * (references[active] - avg)
    return w


def active_average(ensemble: ReferenceEnsemble, schedule: ModeSchedule, t: float) -> float:
    """Active weighted average ``avg^a(t)``."""
    return weighted_average(schedule.weights_at(t), ensemble.values(t))


def disagreement(ensemble: ReferenceEnsemble, schedule: ModeSchedule, t: float) -> np.ndarray:
    """Disagreement input ``w(t)``; sums to zero up to rounding."""
    return weighted_disagreement(schedule.weights_at(t), ensemble.values(t))


def smooth_derivatives(
    ensemble: ReferenceEnsemble, schedule: ModeSchedule, t: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Absolutely continuous parts of the error-dynamics inputs at ``t``.

    Returns:
        ``(E r' - avg' 1, -w~')`` with the weights of the epoch containing ``t``
    """
    eta = schedule.weights_at(t)
    rates = ensemble.derivatives(t)
    active = eta > 0
    eta_rates = np.zeros_like(eta)
    eta_rates[active] = eta[active] * rates[active]
    avg_rate = eta_rates.sum() / eta.sum()
    w_rate = np.zeros_like(eta)
    w_rate[active] = eta[active] * (rates[active] - avg_rate)
    return eta_rates - avg_rate, -w_rate


def jumps_at(ensemble: ReferenceEnsemble, schedule: ModeSchedule, k: int) -> Tuple[float, np.ndarray]:
    """Jumps ``(delta_avg_k, delta_w_k)`` across the ``k``-th switch (1-based).

    The left side uses the previous epoch's weights and the signals' left
    limits; the right side the new epoch's weights and values.
    """
    switches = schedule.switch_times
    if not 1 <= k <= switches.size:
        raise InvalidInputError(f"switch index {k} outside 1..{switches.size}")
    t_k = float(switches[k - 1])
    eta_left = schedule.weights_before(t_k)
    eta_right = schedule.weights_at(t_k)
    r_left = ensemble.left_values(t_k)
    r_right = ensemble.values(t_k)
    delta_avg = weighted_average(eta_right, r_right) - weighted_average(eta_left, r_left)
    delta_w = weighted_disagreement(eta_right, r_right) - weighted_disagreement(eta_left, r_left)
    return delta_avg, delta_w


def zoh_sample(signal: ReferenceSignal, delta_s: float, t: float) -> float:
    """Value at the latest sample instant ``delta_s * floor(t / delta_s)``."""
    if not delta_s > 0:
        raise InvalidInputError("sampling period must be positive")
    if t < 0:
        raise InvalidInputError("sample time must be non-negative")
    instant = delta_s * math.floor(t / delta_s + TIME_EPS)
    return signal.value(instant)


def uncovered_breakpoints(ensemble: ReferenceEnsemble, schedule: ModeSchedule, t_end: float) -> List[float]:
    """Signal breakpoints that do not coincide with a switch time."""
    switches = schedule.switch_times
    loose = []
    for point in ensemble.breakpoints(t_end):
        if not np.any(np.abs(switches - point) <= TIME_EPS * max(1.0, point)):
            loose.append(point)
    return loose
