"""Scenario documents: pydantic models, JSON loading and builders for the domain objects."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from active_consensus.ct_sim import DEFAULT_STEP, CtScenario
from active_consensus.dt_sim import DtScenario
from active_consensus.errors import ConfigError
from active_consensus.graph import GENERATORS, Topology
from active_consensus.schedule import Departure, DwellStats, ModeSchedule
from active_consensus.signals import (
    Constant,
    Piecewise,
    Polynomial,
    ReferenceEnsemble,
    ReferenceSignal,
    Sinusoid,
    ZohTrack,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TopologySpec(_Spec):
    """Either a named generator (``ring``, ``path``, ``complete``) or an explicit adjacency."""

    kind: Literal["ring", "path", "complete", "adjacency"]
    n: Optional[int] = Field(default=None, ge=2)
    weight: float = Field(default=1.0, gt=0)
    adjacency: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _complete(self) -> "TopologySpec":
        if self.kind == "adjacency":
            if self.adjacency is None:
                raise ValueError("kind 'adjacency' needs an adjacency matrix")
        elif self.n is None:
            raise ValueError(f"kind '{self.kind}' needs n")
        return self

    @property
    def size(self) -> int:
        return len(self.adjacency) if self.kind == "adjacency" else int(self.n)

    def build(self) -> Topology:
        if self.kind == "adjacency":
            return Topology(np.array(self.adjacency, dtype=float))
        assert self.kind in GENERATORS
        return Topology.from_generator(self.kind, int(self.n), self.weight)


class EpochSpec(_Spec):
    t: float = Field(ge=0)
    weights: List[float]


class DepartureSpec(_Spec):
    t: float = Field(gt=0)
    agent: int = Field(ge=0)


class ScheduleSpec(_Spec):
    epochs: List[EpochSpec] = Field(min_length=1)
    departures: List[DepartureSpec] = Field(default_factory=list)

    def build(self, horizon: float) -> ModeSchedule:
        return ModeSchedule(
            [(e.t, e.weights) for e in self.epochs],
            horizon,
            [Departure(d.t, d.agent) for d in self.departures],
        )


class ConstantParams(_Spec):
    value: float


class SinusoidParams(_Spec):
    offset: float = 0.0
    amplitude: float = 1.0
    frequency: float
    phase: float = 0.0


class ZohParams(_Spec):
    samples: List[float] = Field(min_length=1)
    period: float = Field(gt=0)


class PolyParams(_Spec):
    coefficients: List[float] = Field(min_length=1)


class PieceSpec(_Spec):
    t: float = Field(ge=0)
    kind: Literal["constant", "sinusoid", "zoh", "poly"]
    params: Dict[str, Any] = Field(default_factory=dict)


class PiecewiseParams(_Spec):
    pieces: List[PieceSpec] = Field(min_length=1)


_PARAMS = {
    "constant": ConstantParams,
    "sinusoid": SinusoidParams,
    "zoh": ZohParams,
    "poly": PolyParams,
    "piecewise": PiecewiseParams,
}


def _build_signal(kind: str, params: Dict[str, Any]) -> ReferenceSignal:
    parsed = _PARAMS[kind].model_validate(params)
    if isinstance(parsed, ConstantParams):
        return Constant(parsed.value)
    if isinstance(parsed, SinusoidParams):
        return Sinusoid(parsed.offset, parsed.amplitude, parsed.frequency, parsed.phase)
    if isinstance(parsed, ZohParams):
        return ZohTrack(parsed.samples, parsed.period)
    if isinstance(parsed, PolyParams):
        return Polynomial(parsed.coefficients)
    return Piecewise([(piece.t, _build_signal(piece.kind, piece.params)) for piece in parsed.pieces])


class SignalSpec(_Spec):
    """``{kind, params}`` for one agent's reference."""

    kind: Literal["constant", "sinusoid", "zoh", "poly", "piecewise"]
    params: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _params_match_kind(self) -> "SignalSpec":
        _PARAMS[self.kind].model_validate(self.params)
        if self.kind == "piecewise":
            for piece in PiecewiseParams.model_validate(self.params).pieces:
                _PARAMS[piece.kind].model_validate(piece.params)
        return self

    def build(self) -> ReferenceSignal:
        return _build_signal(self.kind, self.params)


class RatesSpec(_Spec):
    step: float = Field(default=DEFAULT_STEP, gt=0)
    delta_c: Optional[float] = Field(default=None, gt=0)
    delta_s: Optional[float] = Field(default=None, gt=0)
    steps: Optional[int] = Field(default=None, ge=0)


class InitialSpec(_Spec):
    x: Optional[List[float]] = None
    v: Optional[List[float]] = None


class DwellSpec(_Spec):
    chatter_bound: int = Field(ge=0)
    average_dwell: float = Field(gt=0)

    def build(self) -> DwellStats:
        return DwellStats(self.chatter_bound, self.average_dwell)


class CertificateSpec(_Spec):
    safety: float = Field(default=1.25, ge=1.0)
    fit_seeds: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5], min_length=1)
    verify_seeds: List[int] = Field(default_factory=lambda: [6, 7, 8, 9, 10], min_length=1)
    starts_per_seed: int = Field(default=4, ge=1)
    sample_step: Optional[float] = Field(default=None, gt=0)


class LeaderSpec(_Spec):
    waypoints: List[Tuple[float, float, float]] = Field(min_length=1)


class ObservationEpochSpec(_Spec):
    t: float = Field(ge=0)
    observed: List[List[int]]


class ContainmentSpec(_Spec):
    leaders: List[LeaderSpec] = Field(min_length=1)
    observations: List[ObservationEpochSpec] = Field(min_length=1)
    max_displacement: Optional[float] = Field(default=None, gt=0)
    freeze_at: Optional[float] = Field(default=None, ge=0)
    initial_positions: Optional[List[Tuple[float, float]]] = None
    tolerance: float = Field(default=1e-9, ge=0)
    error_threshold: Optional[float] = Field(default=None, gt=0)


class ScenarioConfig(_Spec):
    """A complete scenario document (``schema_version: 1``)."""

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "scenario"
    seed: int = Field(default=0, ge=0, lt=2**64)
    horizon: float = Field(ge=0)
    topology: TopologySpec
    schedule: Optional[ScheduleSpec] = None
    signals: List[SignalSpec] = Field(default_factory=list)
    rates: RatesSpec = Field(default_factory=RatesSpec)
    initial: InitialSpec = Field(default_factory=InitialSpec)
    dwell: Optional[DwellSpec] = None
    certificate: CertificateSpec = Field(default_factory=CertificateSpec)
    bounds: bool = False
    containment: Optional[ContainmentSpec] = None

    @model_validator(mode="after")
    def _cross_check(self) -> "ScenarioConfig":
        n = self.topology.size
        if self.schedule is not None:
            for index, epoch in enumerate(self.schedule.epochs):
                if len(epoch.weights) != n:
                    raise ValueError(f"schedule.epochs.{index}.weights has {len(epoch.weights)} entries for {n} agents")
            for index, departure in enumerate(self.schedule.departures):
                if departure.agent >= n:
                    raise ValueError(f"schedule.departures.{index}.agent {departure.agent} is out of range")
        if self.signals and len(self.signals) != n:
            raise ValueError(f"signals lists {len(self.signals)} entries for {n} agents")
        for name in ("x", "v"):
            values = getattr(self.initial, name)
            if values is not None and len(values) != n:
                raise ValueError(f"initial.{name} has {len(values)} entries for {n} agents")
        if self.bounds and self.dwell is None:
            raise ValueError("bound evaluation needs a dwell declaration")
        if self.containment is not None:
            spec = self.containment
            for index, epoch in enumerate(spec.observations):
                if len(epoch.observed) != n:
                    raise ValueError(f"containment.observations.{index}.observed must list {n} followers")
            if spec.initial_positions is not None and len(spec.initial_positions) != n:
                raise ValueError(f"containment.initial_positions must list {n} followers")
        return self

    def _require_consensus(self) -> ScheduleSpec:
        if self.schedule is None or not self.signals:
            raise ConfigError("this command needs 'schedule' and 'signals'")
        return self.schedule

    def build_topology(self) -> Topology:
        return self.topology.build()

    def build_schedule(self) -> ModeSchedule:
        return self._require_consensus().build(self.horizon)

    def build_ensemble(self) -> ReferenceEnsemble:
        self._require_consensus()
        return ReferenceEnsemble(signal.build() for signal in self.signals)

    def initial_state(self) -> Tuple[np.ndarray, np.ndarray]:
        n = self.topology.size
        x0 = np.zeros(n) if self.initial.x is None else np.array(self.initial.x, dtype=float)
        v0 = np.zeros(n) if self.initial.v is None else np.array(self.initial.v, dtype=float)
        return x0, v0

    def ct_scenario(self) -> CtScenario:
        return CtScenario(self.build_topology(), self.build_schedule(), self.build_ensemble(), self.rates.step)

    def dt_scenario(self) -> DtScenario:
        rates = self.rates
        if rates.delta_c is None or rates.delta_s is None:
            raise ConfigError("discrete-time runs need rates.delta_c and rates.delta_s")
        steps = rates.steps
        if steps is None:
            steps = int(np.floor(self.horizon / rates.delta_c + 1e-9))
        return DtScenario(
            self.build_topology(),
            self.build_schedule(),
            self.build_ensemble(),
            rates.delta_c,
            rates.delta_s,
            steps,
        )

    def dwell_stats(self) -> Optional[DwellStats]:
        return None if self.dwell is None else self.dwell.build()


def _location(path: Tuple[Union[int, str], ...]) -> str:
    return ".".join(str(part) for part in path) or "<root>"


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse and validate a JSON scenario document.

    Raises:
        ConfigError: With line and column for JSON syntax errors and the JSON
            path of the offending field for validation errors
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if isinstance(data, dict) and data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"{source}: unsupported schema_version {data.get('schema_version')!r}; expected {SCHEMA_VERSION}")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(f"{_location(err['loc'])}: {err['msg']}" for err in exc.errors())
        raise ConfigError(f"{source}: {problems}") from exc


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    config = parse_config(text, str(path))
    logger.debug("loaded scenario '%s' from %s", config.name, path)
    return config


def dump_config(config: ScenarioConfig) -> str:
    """Serialize so that ``parse_config(dump_config(c)) == c``."""
    return json.dumps(config.model_dump(mode="json"), indent=2)
