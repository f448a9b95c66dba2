"""Per-agent belief state and the min-rule update steps, all in log domain.

Three vectors evolve per agent:

* log_pi: private Bayesian posterior from the agent's own signals only.
* log_mu: the agent's actual belief, formed by taking the entrywise minimum
  of its lowest-heard tracker and its fresh posterior, then renormalizing.
* log_mubar: running entrywise minimum of everything the agent has held or
  heard so far (never renormalized, hence non-increasing per hypothesis).

Working in logs keeps horizons of thousands of steps exact where linear
probabilities would underflow.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import InvariantBreach, ProtocolViolation
from .hypotheses import LikelihoodModel
from .network import Graph

# Tolerated |logsumexp| drift of a freshly normalized belief.
NORMALIZATION_TOL = 1e-9


def log_sum_exp(values: np.ndarray) -> float:
    """Max-shifted logsumexp of a 1-D array; -inf input propagates cleanly."""
    peak = np.max(values)
    if not np.isfinite(peak):
        return float(peak)
    return float(peak + np.log(np.sum(np.exp(values - peak))))


def log_normalize(values: np.ndarray) -> np.ndarray:
    total = log_sum_exp(values)
    if not np.isfinite(total):
        raise InvariantBreach("belief vector has no finite mass")
    return values - total


@dataclass(frozen=True)
class BeliefState:
    agent: int
    log_pi: np.ndarray
    log_mu: np.ndarray
    log_mubar: np.ndarray

    @classmethod
    def from_prior(cls, agent: int, prior: Sequence[float]) -> "BeliefState":
        prior = np.asarray(prior, dtype=np.float64)
        if np.any(prior <= 0.0) or abs(prior.sum() - 1.0) > 1e-9:
            raise ProtocolViolation(f"agent {agent}: prior must be a full-support distribution")
        log_prior = np.log(prior)
        return cls(agent=agent, log_pi=log_prior, log_mu=log_prior.copy(), log_mubar=log_prior.copy())

    @property
    def m(self) -> int:
        return self.log_mu.shape[0]


def bayes_update(state: BeliefState, model: LikelihoodModel, signal: int) -> BeliefState:
    """Condition the private posterior on one observed signal."""
    if not (0 <= signal < model.signal_count):
        raise ProtocolViolation(f"signal {signal} outside alphabet of size {model.signal_count}")
    log_pi = log_normalize(state.log_pi + model.log_table[:, signal])
    return replace(state, log_pi=log_pi)


def min_rule_update(state: BeliefState) -> BeliefState:
    """Form the actual belief: normalized entrywise min of tracker and posterior."""
    raw = np.minimum(state.log_mubar, state.log_pi)
    if not np.isfinite(np.max(raw)):
        raise InvariantBreach("min-rule input vanished for every hypothesis")
    return replace(state, log_mu=log_normalize(raw))


def mubar_merge(state: BeliefState, heard: Iterable[tuple[int, float]]) -> BeliefState:
    """Fold heard (hypothesis index, log value) pairs plus own belief into the tracker."""
    log_mubar = np.minimum(state.log_mubar, state.log_mu)
    for theta, log_value in heard:
        if log_value > 0.0:
            raise ProtocolViolation(f"heard belief above 1 for hypothesis {theta}")
        if log_value < log_mubar[theta]:
            log_mubar[theta] = log_value
    return replace(state, log_mubar=log_mubar)


def mubar_merge_quantized(state: BeliefState, neighbor_log_q: np.ndarray) -> BeliefState:
    """Tracker update in the quantized scheme: min over tracker, own belief,
    and every neighbor's current quantizer endpoint (full vectors, shape (k, m))."""
    neighbor_log_q = np.asarray(neighbor_log_q, dtype=np.float64)
    if np.any(neighbor_log_q > 0.0):
        raise ProtocolViolation("neighbor quantizer endpoint above 1")
    log_mubar = np.minimum(state.log_mubar, state.log_mu)
    if neighbor_log_q.size:
        log_mubar = np.minimum(log_mubar, neighbor_log_q.min(axis=0))
    return replace(state, log_mubar=log_mubar)


def dense_baseline_step(
    states: Sequence[BeliefState],
    graph: Graph,
    models: Sequence[LikelihoodModel],
    signals: Sequence[int],
) -> list[BeliefState]:
    """One synchronous step of the always-communicate baseline.

    Every agent conditions on its signal, applies the min rule, then merges
    every neighbor's fresh belief. Reference implementation used as an oracle
    for the vectorized engine; O(n * m) per step and deliberately simple.
    """
    if not (len(states) == len(models) == len(signals) == graph.n):
        raise ProtocolViolation("states, models, signals, and graph must agree on n")
    updated = [
        min_rule_update(bayes_update(state, model, signal))
        for state, model, signal in zip(states, models, signals)
    ]
    merged = []
    for state in updated:
        heard = [
            (theta, float(updated[v - 1].log_mu[theta]))
            for v in graph.neighbors[state.agent - 1]
            for theta in range(state.m)
        ]
        merged.append(mubar_merge(state, heard))
    return merged
