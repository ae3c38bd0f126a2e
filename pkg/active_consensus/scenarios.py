"""Canned demonstration scenarios and seeded random instances."""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from active_consensus.config import ScenarioConfig
from active_consensus.dt_sim import DtScenario
from active_consensus.errors import InvalidInputError
from active_consensus.graph import Topology, spectral_decomposition
from active_consensus.analysis import max_stable_step
from active_consensus.schedule import ModeSchedule
from active_consensus.signals import Constant, ReferenceEnsemble, ReferenceSignal, Sinusoid

logger = logging.getLogger(__name__)


def _one_hot(n: int, agents: Sequence[int], weight: float) -> List[float]:
    eta = [0.0] * n
    for agent in agents:
        eta[agent] = weight
    return eta


def ring_config() -> ScenarioConfig:
    """Six agents on a ring with dynamic then static references and a departure.

    Active sets (0-based) are ``{0, 1, 3, 5}`` on ``[0, 50)``, ``{1, 2, 4, 5}``
    on ``[50, 70)`` and ``{2, 5}`` on ``[70, 120]``. References are sinusoids
    until ``t = 50`` and constants afterwards; agent 0 leaves at ``t = 90``.
    """
    n, weight = 6, 6.0
    offsets = [1.0, -2.0, 3.0, 0.5, -1.0, 2.5]
    amplitudes = [1.0, 0.8, 0.0, 1.2, 0.0, 0.6]
    frequencies = [0.5, 0.3, 0.0, 0.7, 0.0, 0.4]
    statics = [2.0, -1.5, 4.0, 1.0, -3.0, 1.5]
    signals = []
    for i in range(n):
        dynamic = (
            {"kind": "sinusoid", "params": {"offset": offsets[i], "amplitude": amplitudes[i], "frequency": frequencies[i]}}
            if amplitudes[i]
            else {"kind": "constant", "params": {"value": offsets[i]}}
        )
        signals.append(
            {
                "kind": "piecewise",
                "params": {
                    "pieces": [
                        {"t": 0.0, **dynamic},
                        {"t": 50.0, "kind": "constant", "params": {"value": statics[i]}},
                    ]
                },
            }
        )
    document = {
        "name": "fig2",
        "horizon": 120.0,
        "topology": {"kind": "ring", "n": n, "weight": 5.0},
        "schedule": {
            "epochs": [
                {"t": 0.0, "weights": _one_hot(n, [0, 1, 3, 5], weight)},
                {"t": 50.0, "weights": _one_hot(n, [1, 2, 4, 5], weight)},
                {"t": 70.0, "weights": _one_hot(n, [2, 5], weight)},
            ],
            "departures": [{"t": 90.0, "agent": 0}],
        },
        "signals": signals,
        "rates": {"step": 0.01},
        "initial": {"x": [0.0, 3.0, -2.0, 5.0, -4.0, 1.0]},
    }
    return ScenarioConfig.model_validate(document)


# Leader start positions and their displacement by t = 15; each leader then
# creeps a further (0.1, 0.05) until t = 20.
_LEADER_STARTS = [
    (4.0, 0.5), (3.0, 3.0), (0.5, 4.5), (-2.5, 3.5), (-4.5, 1.0),
    (-4.0, -2.0), (-1.5, -4.0), (1.5, -4.5), (3.5, -2.5), (0.0, 0.5),
]
_LEADER_DRIFT = [
    (2.0, 1.0), (1.5, 1.5), (2.5, 0.5), (2.0, 1.2), (1.8, 0.8),
    (2.2, 1.0), (2.0, 0.6), (1.6, 1.4), (2.4, 1.1), (2.0, 1.0),
]

# Observed leader sets per follower (0-based) from t = 0, 5 and 10.
_OBSERVATIONS = [
    (0.0, [[0, 3, 5, 7], [1, 3, 6, 7, 9], [2, 3, 4, 8], [], [0, 2, 8], []]),
    (5.0, [[2, 4, 5, 7], [0, 1, 6, 8, 9], [2, 3, 4, 8], [], [0, 2, 8], [1, 4, 6, 8]]),
    (10.0, [[0, 1, 4, 7], [1, 2, 5, 6, 9], [2, 3, 4, 8], [2, 9], [0, 2, 8], [1, 4, 6, 8]]),
]


def leaders_config() -> ScenarioConfig:
    """Six followers on a ring tracking ten planar leaders.

    Followers sample the leaders every second and communicate every 0.2 s.
    Leaders slow down from ``t = 15`` and stop at ``t = 20``; the run lasts
    150 steps (30 s).
    """
    leaders = []
    for (x, y), (dx, dy) in zip(_LEADER_STARTS, _LEADER_DRIFT):
        leaders.append(
            {
                "waypoints": [
                    (0.0, x, y),
                    (15.0, x + dx, y + dy),
                    (20.0, x + dx + 0.1, y + dy + 0.05),
                ]
            }
        )
    document = {
        "name": "fig4",
        "horizon": 30.0,
        "topology": {"kind": "ring", "n": 6, "weight": 1.0},
        "rates": {"delta_c": 0.2, "delta_s": 1.0, "steps": 150},
        "containment": {
            "leaders": leaders,
            "observations": [{"t": t, "observed": observed} for t, observed in _OBSERVATIONS],
            "max_displacement": 0.25,
            "freeze_at": 20.0,
            "initial_positions": [(-6.0, -6.0), (6.0, -6.0), (6.0, 6.0), (-6.0, 6.0), (0.0, -7.0), (0.0, 7.0)],
        },
    }
    return ScenarioConfig.model_validate(document)


CANNED: Dict[str, Callable[[], ScenarioConfig]] = {"fig2": ring_config, "fig4": leaders_config}
ALIASES = {"ring": "fig2", "leaders": "fig4"}
DEMO_NAMES = sorted(CANNED) + sorted(ALIASES) + ["random"]


def demo_config(name: str, seed: int = 0) -> ScenarioConfig:
    """Resolve a built-in scenario by name or alias; ``seed`` only applies to ``random``."""
    if name == "random":
        return random_config(seed)
    canonical = ALIASES.get(name, name)
    if canonical not in CANNED:
        raise InvalidInputError(f"unknown scenario '{name}'; choose from {', '.join(DEMO_NAMES)}")
    return CANNED[canonical]()


def random_topology(
    rng: np.random.Generator,
    n_range: Tuple[int, int] = (2, 10),
    edge_probability: float = 0.3,
    weight_range: Tuple[float, float] = (0.5, 2.0),
) -> Topology:
    """Connected weighted graph: a random spanning tree plus extra random edges."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    adjacency = np.zeros((n, n))
    for i in range(1, n):
        j = int(rng.integers(0, i))
        adjacency[i, j] = adjacency[j, i] = rng.uniform(*weight_range)
    for i in range(n):
        for j in range(i + 1, n):
            if adjacency[i, j] == 0 and rng.random() < edge_probability:
                adjacency[i, j] = adjacency[j, i] = rng.uniform(*weight_range)
    return Topology(adjacency)


def random_weights(rng: np.random.Generator, n: int, high: float = 2.0) -> np.ndarray:
    """Weights in ``(0, high]`` on a random non-empty active set."""
    mask = rng.random(n) < 0.5
    mask[int(rng.integers(0, n))] = True
    return np.where(mask, high - rng.uniform(0.0, high, size=n), 0.0)


def random_weight_set(rng: np.random.Generator, n: int, count: int = 3, high: float = 2.0) -> List[np.ndarray]:
    return [random_weights(rng, n, high) for _ in range(count)]


def random_schedule(
    rng: np.random.Generator,
    weight_set: Sequence[np.ndarray],
    horizon: float,
    dwell: Tuple[float, float],
    quantum: Optional[float] = None,
) -> ModeSchedule:
    """Switch to a different weight pattern after gaps drawn from ``dwell``.

    With ``quantum`` set, gaps are whole multiples of it (e.g. of ``delta_c``).
    """
    low, high = dwell
    if not 0 < low <= high:
        raise ValueError("dwell range must satisfy 0 < low <= high")
    current = int(rng.integers(0, len(weight_set)))
    epochs = [(0.0, weight_set[current])]
    t, ticks = 0.0, 0
    while True:
        if quantum:
            ticks += int(rng.integers(math.ceil(low / quantum - 1e-9), math.floor(high / quantum + 1e-9) + 1))
            t = ticks * quantum
        else:
            t += float(rng.uniform(low, high))
        if t >= horizon:
            break
        if len(weight_set) > 1:
            current = (current + int(rng.integers(1, len(weight_set)))) % len(weight_set)
        epochs.append((t, weight_set[current]))
    return ModeSchedule(epochs, horizon)


def random_ensemble(rng: np.random.Generator, n: int, kind: str = "sinusoid") -> ReferenceEnsemble:
    """Constant or sinusoidal references with bounded derivatives."""
    signals: List[ReferenceSignal] = []
    for _ in range(n):
        if kind == "constant":
            signals.append(Constant(rng.uniform(-5.0, 5.0)))
        else:
            signals.append(
                Sinusoid(
                    offset=rng.uniform(-5.0, 5.0),
                    amplitude=rng.uniform(0.0, 1.0),
                    frequency=rng.uniform(0.1, 1.0),
                    phase=rng.uniform(0.0, 2.0 * math.pi),
                )
            )
    return ReferenceEnsemble(signals)


def random_dt_scenario(
    seed: int,
    n_range: Tuple[int, int] = (2, 8),
    steps: int = 500,
    step_fraction: float = 0.5,
    dwell_steps: Tuple[int, int] = (25, 75),
) -> Tuple[DtScenario, np.ndarray, np.ndarray]:
    """Random switching scenario with ``delta_c = step_fraction * d_bar``."""
    rng = np.random.default_rng(seed)
    topology = random_topology(rng, n_range)
    weight_set = random_weight_set(rng, topology.n)
    d_bar = max_stable_step(spectral_decomposition(topology), weight_set)
    delta_c = step_fraction * d_bar
    horizon = steps * delta_c
    schedule = random_schedule(
        rng, weight_set, horizon, (dwell_steps[0] * delta_c, dwell_steps[1] * delta_c), quantum=delta_c
    )
    delta_s = delta_c * float(rng.uniform(0.5, 3.0))
    scenario = DtScenario(topology, schedule, random_ensemble(rng, topology.n), delta_c, delta_s, steps)
    x0 = rng.uniform(-5.0, 5.0, size=topology.n)
    v0 = rng.uniform(-1.0, 1.0, size=topology.n)
    logger.debug("random scenario seed=%d n=%d delta_c=%.4g", seed, topology.n, delta_c)
    return scenario, x0, v0


def random_config(
    seed: int,
    n_range: Tuple[int, int] = (2, 8),
    steps: int = 500,
    step_fraction: float = 0.5,
    dwell_steps: Tuple[int, int] = (25, 75),
) -> ScenarioConfig:
    """Scenario document for ``random_dt_scenario(seed, ...)`` with bounds enabled.

    The declared dwell statistics hold by construction: every gap is at least
    ``dwell_steps[0]`` communication periods.
    """
    scenario, x0, v0 = random_dt_scenario(seed, n_range, steps, step_fraction, dwell_steps)
    signals = [
        {
            "kind": "sinusoid",
            "params": {
                "offset": s.offset,
                "amplitude": s.amplitude,
                "frequency": s.frequency,
                "phase": s.phase,
            },
        }
        for s in scenario.ensemble.signals
    ]
    document = {
        "name": f"random-{seed}",
        "seed": seed,
        "horizon": scenario.schedule.horizon_end,
        "topology": {"kind": "adjacency", "adjacency": scenario.topology.adjacency.tolist()},
        "schedule": {
            "epochs": [{"t": e.start, "weights": e.weights.tolist()} for e in scenario.schedule.epochs],
        },
        "signals": signals,
        "rates": {"delta_c": scenario.delta_c, "delta_s": scenario.delta_s, "steps": scenario.steps},
        "initial": {"x": x0.tolist(), "v": v0.tolist()},
        "dwell": {"chatter_bound": 1, "average_dwell": dwell_steps[0] * scenario.delta_c},
        "bounds": True,
    }
    return ScenarioConfig.model_validate(document)
