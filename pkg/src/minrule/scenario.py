"""Scenario schema, validation, presets, and compilation to runtime objects.

A scenario is declared as structured data (YAML on disk, JSON over the API)
and validated strictly: unknown keys are rejected with their field paths, and
cross-field rules (agent/graph agreement, algorithm-specific requirements)
run at parse time so a scenario that loads is a scenario that runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ConfigError, SimulatorError
from .events import EventSchedule, ThresholdFn, build_schedule
from .hypotheses import LikelihoodModel
from .network import Graph, GraphSequence, is_connected
from .quantizer import MAX_BITS

SCHEMA_VERSION = 1

Algorithm = Literal["event_triggered", "dense", "time_varying", "quantized"]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AgentConfig(StrictModel):
    id: int = Field(ge=1)
    likelihoods: list[list[float]]
    prior: list[float] | None = None


class GraphConfig(StrictModel):
    """Static topology (edges) or a periodic schedule of edge frames (frames)."""

    n: int = Field(ge=1)
    edges: list[tuple[int, int]] | None = None
    frames: list[list[tuple[int, int]]] | None = None

    @model_validator(mode="after")
    def _one_topology(self):
        if (self.edges is None) == (self.frames is None):
            raise ValueError("give exactly one of 'edges' (static) or 'frames' (periodic)")
        if self.frames is not None and not self.frames:
            raise ValueError("'frames' must contain at least one frame")
        return self


class ScheduleConfig(StrictModel):
    family: Literal["constant", "polynomial", "exponential", "custom"] = "constant"
    param: float | None = 1
    table: list[int] | None = None

    @model_validator(mode="after")
    def _family_params(self):
        if self.family == "custom":
            if not self.table:
                raise ValueError("custom schedule requires a 'table' of gaps")
        elif self.table is not None:
            raise ValueError("'table' is only valid for the custom family")
        return self


class ThresholdConfig(StrictModel):
    family: Literal["constant", "power"] = "constant"
    value: float = 1.0
    exponent: float = 0.0


class ConsistencyConfig(StrictModel):
    threshold: float = Field(default=0.99, gt=0.0, le=1.0)
    # Fraction of the horizon when < 1, else a whole number of final steps.
    window: float = Field(default=0.1, gt=0.0)

    @model_validator(mode="after")
    def _window_shape(self):
        if self.window >= 1.0 and self.window != int(self.window):
            raise ValueError("window >= 1 must be a whole number of steps")
        return self


class OutputConfig(StrictModel):
    stride: int = Field(default=1, ge=1)
    log_events: bool = True
    log_messages: bool = True


class Scenario(StrictModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "scenario"
    hypotheses: list[str] = Field(min_length=2)
    true_state: str
    agents: list[AgentConfig] = Field(min_length=1)
    graph: GraphConfig
    algorithm: Algorithm
    schedule: ScheduleConfig = ScheduleConfig()
    threshold: ThresholdConfig = ThresholdConfig()
    bits: int | dict[str, int] | None = None
    horizon: int = Field(ge=1)
    seed: int = 0
    consistency: ConsistencyConfig = ConsistencyConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _cross_checks(self):
        labels = self.hypotheses
        if len(set(labels)) != len(labels):
            raise ValueError("hypothesis labels must be unique")
        if self.true_state not in labels:
            raise ValueError(f"true_state {self.true_state!r} is not a declared hypothesis")

        n = self.graph.n
        ids = sorted(agent.id for agent in self.agents)
        if ids != list(range(1, n + 1)):
            raise ValueError(f"agent ids must be exactly 1..{n}, got {ids}")
        m = len(labels)
        for agent in self.agents:
            if len(agent.likelihoods) != m:
                raise ValueError(
                    f"agent {agent.id}: {len(agent.likelihoods)} likelihood rows for {m} hypotheses"
                )
            widths = {len(row) for row in agent.likelihoods}
            if len(widths) != 1 or min(widths) < 1:
                raise ValueError(f"agent {agent.id}: likelihood rows must share one signal alphabet")
            if agent.prior is not None and len(agent.prior) != m:
                raise ValueError(f"agent {agent.id}: prior needs {m} entries")

        static_algorithms = ("event_triggered", "dense", "quantized")
        if self.algorithm in static_algorithms and self.graph.edges is None:
            raise ValueError(f"{self.algorithm} requires a static graph ('edges')")
        if self.algorithm != "event_triggered":
            if not (self.schedule.family == "constant" and self.schedule.param == 1):
                raise ValueError(f"{self.algorithm} monitors every step; leave 'schedule' at its default")
        if self.algorithm == "time_varying" and self.threshold.family != "constant":
            raise ValueError("time_varying uses a constant threshold")

        if self.algorithm == "quantized":
            if self.bits is None:
                raise ValueError("quantized requires 'bits' (one width, or one per hypothesis)")
            try:
                widths = self.bits_per_hypothesis()
            except ConfigError as exc:
                raise ValueError(str(exc)) from None
            for label, width in zip(labels, widths):
                if not (1 <= width <= MAX_BITS):
                    raise ValueError(f"bits[{label!r}] must lie in 1..{MAX_BITS}")
        elif self.bits is not None:
            raise ValueError("'bits' is only valid for the quantized algorithm")
        return self

    def bits_per_hypothesis(self) -> list[int]:
        if isinstance(self.bits, int):
            return [self.bits] * len(self.hypotheses)
        if isinstance(self.bits, dict):
            missing = [x for x in self.hypotheses if x not in self.bits]
            extra = [x for x in self.bits if x not in self.hypotheses]
            if missing or extra:
                raise ConfigError(f"bits keys mismatch: missing {missing}, unknown {extra}")
            return [int(self.bits[x]) for x in self.hypotheses]
        raise ConfigError("scenario has no bit widths")


@dataclass
class CompiledScenario:
    """Runtime objects resolved from a validated Scenario."""

    name: str
    labels: tuple[str, ...]
    theta_star: int
    models: list[LikelihoodModel]
    graphs: GraphSequence
    algorithm: str
    schedule: EventSchedule | None
    threshold: ThresholdFn | None
    bits: np.ndarray | None
    log_priors: np.ndarray
    horizon: int
    seed: int
    stride: int
    log_events: bool
    log_messages: bool
    consistency_threshold: float
    consistency_window: float

    @property
    def n(self) -> int:
        return len(self.models)

    @property
    def m(self) -> int:
        return len(self.labels)


def compile_scenario(cfg: Scenario) -> CompiledScenario:
    labels = tuple(cfg.hypotheses)
    m = len(labels)
    n = cfg.graph.n

    models = [
        LikelihoodModel(agent=agent.id, table=np.asarray(agent.likelihoods, dtype=np.float64))
        for agent in sorted(cfg.agents, key=lambda a: a.id)
    ]

    if cfg.graph.edges is not None:
        graphs = GraphSequence.static(Graph(n, tuple((a, b) for a, b in cfg.graph.edges)))
    else:
        graphs = GraphSequence(
            frames=tuple(Graph(n, tuple((a, b) for a, b in frame)) for frame in cfg.graph.frames)
        )
    if cfg.algorithm in ("event_triggered", "dense", "quantized") and not is_connected(graphs.at(1)):
        raise ConfigError(f"{cfg.algorithm} requires a connected graph")

    log_priors = np.empty((n, m), dtype=np.float64)
    for row, agent in enumerate(sorted(cfg.agents, key=lambda a: a.id)):
        if agent.prior is None:
            log_priors[row] = -np.log(m)
        else:
            prior = np.asarray(agent.prior, dtype=np.float64)
            if np.any(prior <= 0.0) or abs(prior.sum() - 1.0) > 1e-9:
                raise ConfigError(f"agent {agent.id}: prior must be full-support and sum to 1")
            log_priors[row] = np.log(prior)

    schedule = None
    threshold = None
    if cfg.algorithm == "event_triggered":
        schedule = build_schedule(
            cfg.schedule.family, cfg.horizon, param=cfg.schedule.param, table=cfg.schedule.table
        )
        threshold = _threshold_fn(cfg.threshold)
    elif cfg.algorithm == "time_varying":
        threshold = _threshold_fn(cfg.threshold)

    bits = None
    if cfg.algorithm == "quantized":
        bits = np.asarray(cfg.bits_per_hypothesis(), dtype=np.int64)

    return CompiledScenario(
        name=cfg.name,
        labels=labels,
        theta_star=labels.index(cfg.true_state),
        models=models,
        graphs=graphs,
        algorithm=cfg.algorithm,
        schedule=schedule,
        threshold=threshold,
        bits=bits,
        log_priors=log_priors,
        horizon=cfg.horizon,
        seed=cfg.seed,
        stride=cfg.output.stride,
        log_events=cfg.output.log_events,
        log_messages=cfg.output.log_messages,
        consistency_threshold=cfg.consistency.threshold,
        consistency_window=cfg.consistency.window,
    )


def _threshold_fn(cfg: ThresholdConfig) -> ThresholdFn:
    return ThresholdFn(family=cfg.family, value=cfg.value, exponent=cfg.exponent)


def load_scenario(path) -> Scenario:
    """Parse and validate a YAML scenario file."""
    with open(path, "r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return Scenario.model_validate(data)


def scenario_to_yaml(cfg: Scenario) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True)


def _uniform_rows(m: int, signals: int) -> list[list[float]]:
    return [[1.0 / signals] * signals for _ in range(m)]


def preset_fig3() -> Scenario:
    """Three agents on a path; only agent 1 can tell the hypotheses apart.

    Event-triggered with unit monitoring gaps and threshold 1/t**2.
    """
    return Scenario(
        name="fig3",
        hypotheses=["theta1", "theta2"],
        true_state="theta1",
        agents=[
            AgentConfig(id=1, likelihoods=[[0.7, 0.3], [0.6, 0.4]]),
            AgentConfig(id=2, likelihoods=_uniform_rows(2, 2)),
            AgentConfig(id=3, likelihoods=_uniform_rows(2, 2)),
        ],
        graph=GraphConfig(n=3, edges=[(1, 2), (2, 3)]),
        algorithm="event_triggered",
        schedule=ScheduleConfig(family="constant", param=1),
        threshold=ThresholdConfig(family="power", value=1.0, exponent=2.0),
        horizon=4000,
    )


def preset_fig4() -> Scenario:
    """Same path topology with a sharper informative agent, 1-bit adaptive quantization."""
    return Scenario(
        name="fig4",
        hypotheses=["theta1", "theta2"],
        true_state="theta1",
        agents=[
            AgentConfig(id=1, likelihoods=[[0.8, 0.2], [0.2, 0.8]]),
            AgentConfig(id=2, likelihoods=_uniform_rows(2, 2)),
            AgentConfig(id=3, likelihoods=_uniform_rows(2, 2)),
        ],
        graph=GraphConfig(n=3, edges=[(1, 2), (2, 3)]),
        algorithm="quantized",
        bits=1,
        horizon=4000,
    )


PRESETS: dict[str, tuple] = {
    "fig3": (preset_fig3, "3-agent path, event-triggered, threshold 1/t^2, horizon 4000"),
    "fig4": (preset_fig4, "3-agent path, adaptive 1-bit quantization, horizon 4000"),
}


def get_preset(name: str) -> Scenario:
    try:
        builder, _ = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    return builder()


def preset_list() -> list[dict[str, str]]:
    return [{"name": name, "description": desc} for name, (_, desc) in sorted(PRESETS.items())]
