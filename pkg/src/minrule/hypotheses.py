"""Hypothesis sets, per-agent signal models, and KL-based source sets.

Each agent observes private signals from a finite alphabet whose conditional
distribution depends on the true hypothesis. An agent is a "source" for an
ordered hypothesis pair when its signal model tells the two apart, i.e. when
the KL divergence between the corresponding rows is positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ModelViolation

# Row sums may drift from 1 by at most this much before the model is rejected.
ROW_SUM_TOL = 1e-12
# KL mass below this counts as "cannot distinguish" when forming source sets.
SOURCE_KL_TOL = 1e-12


@dataclass(frozen=True)
class HypothesisSet:
    """Finite, ordered set of candidate world states."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            raise ModelViolation("need at least one hypothesis")
        if len(set(labels)) != len(labels):
            raise ModelViolation("hypothesis labels must be unique")
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ModelViolation(f"unknown hypothesis {label!r}") from None


@dataclass(frozen=True)
class LikelihoodModel:
    """One agent's conditional signal distributions, one row per hypothesis.

    Rows must be strictly positive (full support) and sum to one within
    ROW_SUM_TOL. Full support keeps every log-likelihood finite, which the
    log-domain belief updates rely on.
    """

    agent: int
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] < 1 or table.shape[1] < 1:
            raise ModelViolation(f"agent {self.agent}: table must be 2-D (hypotheses x signals)")
        if not np.all(np.isfinite(table)):
            raise ModelViolation(f"agent {self.agent}: non-finite likelihood entry")
        if np.any(table <= 0.0):
            raise ModelViolation(f"agent {self.agent}: likelihoods must be strictly positive")
        sums = table.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
        if bad.size:
            raise ModelViolation(
                f"agent {self.agent}: row {bad[0]} sums to {sums[bad[0]]!r}, expected 1"
            )
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def m(self) -> int:
        return self.table.shape[0]

    @property
    def signal_count(self) -> int:
        return self.table.shape[1]

    @cached_property
    def log_table(self) -> np.ndarray:
        out = np.log(self.table)
        out.setflags(write=False)
        return out

    @cached_property
    def signal_cdf(self) -> np.ndarray:
        """Per-row CDF for inverse-transform sampling; last column pinned to 1."""
        cdf = np.cumsum(self.table, axis=1)
        cdf[:, -1] = 1.0
        cdf.setflags(write=False)
        return cdf


def kl_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """KL divergence sum(p * log(p/q)) in nats, with 0 * log(0/q) == 0.

    q must have full support; p must be a distribution over the same alphabet.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p must be a probability vector")
    if np.any(q <= 0.0):
        raise ModelViolation("q must be strictly positive everywhere")
    mask = p > 0.0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


@dataclass(frozen=True)
class SourceSet:
    """All pairwise per-agent divergences, with membership queries.

    kl[i, p, q] is agent (i+1)'s divergence between hypothesis rows p and q.
    Agent ids are 1-based everywhere at the API surface.
    """

    kl: np.ndarray
    tol: float = SOURCE_KL_TOL

    @property
    def n(self) -> int:
        return self.kl.shape[0]

    @property
    def m(self) -> int:
        return self.kl.shape[1]

    def divergence(self, agent: int, p: int, q: int) -> float:
        return float(self.kl[agent - 1, p, q])

    def is_source(self, agent: int, p: int, q: int) -> bool:
        return bool(self.kl[agent - 1, p, q] > self.tol)

    def members(self, p: int, q: int) -> tuple[int, ...]:
        """Agents able to tell hypothesis p from q (1-based ids)."""
        idx = np.nonzero(self.kl[:, p, q] > self.tol)[0]
        return tuple(int(i) + 1 for i in idx)


def source_sets(models: Iterable[LikelihoodModel]) -> SourceSet:
    models = list(models)
    if not models:
        raise ModelViolation("need at least one agent model")
    m = models[0].m
    for model in models:
        if model.m != m:
            raise ModelViolation(
                f"agent {model.agent}: {model.m} hypothesis rows, expected {m}"
            )
    kl = np.zeros((len(models), m, m))
    for i, model in enumerate(models):
        for p in range(m):
            for q in range(m):
                if p != q:
                    kl[i, p, q] = kl_divergence(model.table[p], model.table[q])
    kl.setflags(write=False)
    return SourceSet(kl=kl)


def agent_rng(master_seed: int, agent_index: int) -> np.random.Generator:
    """Independent per-agent stream derived from one master seed.

    Uses a child SeedSequence keyed by the agent's 0-based index, so streams
    are reproducible regardless of how many agents exist or in what order
    they draw.
    """
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(agent_index,))
    return np.random.default_rng(seq)


def sample_signal(model: LikelihoodModel, true_state: int, rng: np.random.Generator) -> int:
    """Draw one signal index under the given hypothesis via inverse CDF."""
    cdf = model.signal_cdf[true_state]
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def sample_signals(
    model: LikelihoodModel, true_state: int, rng: np.random.Generator, count: int
) -> np.ndarray:
    """Vectorized sample_signal; consumes the stream exactly like repeated single draws."""
    cdf = model.signal_cdf[true_state]
    return np.searchsorted(cdf, rng.random(count), side="right").astype(np.int64)
