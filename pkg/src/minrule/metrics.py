"""Rejection-rate statistics, theoretical bounds, consistency, and broadcast tallies."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .hypotheses import SourceSet
from .network import UNREACHABLE
from .trace import BroadcastLog, MessageLog, RunTrace

LOG2 = math.log(2.0)


def empirical_rate(trace: RunTrace, agent: int, theta: int, t: int | None = None) -> float:
    """Empirical rejection rate -log(mu)/t for one agent and hypothesis.

    Computed from the log-domain trace, so it stays exact long after the
    linear belief would underflow. t defaults to the horizon and must be a
    recorded step.
    """
    t = trace.horizon if t is None else int(t)
    if t < 1:
        raise ConfigError(f"rates need t >= 1, got {t}")
    if theta == trace.theta_star:
        warnings.warn("rate requested for the true hypothesis; expect ~0", RuntimeWarning, stacklevel=2)
    return float(-trace.log_mu[trace.row_for(t), agent - 1, theta] / t)


def rate_bound_event(
    sources: SourceSet,
    dist: np.ndarray,
    alpha: float,
    theta_star: int,
    theta: int,
    agent: int,
) -> float:
    """Guaranteed asymptotic rate under event-triggered communication:
    the best source discounted by alpha per hop of distance to the agent."""
    best = 0.0
    for v in sources.members(theta_star, theta):
        hops = int(dist[v - 1, agent - 1])
        if hops == UNREACHABLE:
            continue
        best = max(best, alpha**hops * sources.divergence(v, theta_star, theta))
    if best == 0.0:
        warnings.warn(
            f"no reachable agent separates hypothesis {theta} from the true state; bound is 0",
            RuntimeWarning,
            stacklevel=2,
        )
    return best


def rate_bound_quantized(sources: SourceSet, bits: int, theta_star: int, theta: int) -> float:
    """Network-wide rate bound with adaptive quantization: the best source
    contribution, each capped at bits * log(2) per step."""
    best = 0.0
    for v in sources.members(theta_star, theta):
        best = max(best, min(bits * LOG2, sources.divergence(v, theta_star, theta)))
    if best == 0.0:
        warnings.warn(
            f"no agent separates hypothesis {theta} from the true state; bound is 0",
            RuntimeWarning,
            stacklevel=2,
        )
    return best


def required_bits(sources: SourceSet, theta: int) -> float:
    """Bit widths strictly above this keep hypothesis theta's endpoint from
    collapsing when theta is false: max over agents and rivals of divergence / log 2."""
    worst = 0.0
    for other in range(sources.m):
        if other == theta:
            continue
        for agent in range(1, sources.n + 1):
            worst = max(worst, sources.divergence(agent, other, theta) / LOG2)
    return worst


def consistency_check(
    trace: RunTrace,
    threshold: float = 0.99,
    window: float = 0.1,
) -> np.ndarray:
    """Per-agent flag: belief in the true state stayed >= threshold over the
    final window (fraction of the horizon when < 1, else a step count)."""
    if not (0.0 < threshold <= 1.0):
        raise ConfigError(f"threshold must lie in (0, 1], got {threshold}")
    steps = int(round(window * trace.horizon)) if window < 1.0 else int(window)
    steps = max(1, min(steps, trace.horizon))
    start = trace.horizon - steps + 1
    rows = trace.times >= start
    if not rows.any():
        raise ConfigError(f"no recorded steps inside the final window of {steps}")
    mu_true = np.exp(trace.log_mu[rows, :, trace.theta_star])
    return np.all(mu_true >= threshold, axis=0)


@dataclass
class PairTally:
    sender: int
    receiver: int
    theta: int
    count: int
    last_t: int


@dataclass
class CommReport:
    """Broadcast counts from an event log, against the always-send budget."""

    total: int
    budget: int
    per_pair: list[PairTally] = field(default_factory=list)
    per_agent: dict[int, int] = field(default_factory=dict)

    def pair(self, sender: int, receiver: int, theta: int) -> PairTally:
        for tally in self.per_pair:
            if (tally.sender, tally.receiver, tally.theta) == (sender, receiver, theta):
                return tally
        return PairTally(sender, receiver, theta, 0, 0)

    def count_after(self, events: BroadcastLog, sender: int, receiver: int, theta: int, t: int) -> int:
        keep = (
            (events.sender == sender)
            & (events.receiver == receiver)
            & (events.theta == theta)
            & (events.t > t)
        )
        return int(np.count_nonzero(keep))


def comm_stats(events: BroadcastLog, n: int, m: int, budget: int) -> CommReport:
    per_pair: list[PairTally] = []
    per_agent = {i: 0 for i in range(1, n + 1)}
    if len(events):
        keys = ((events.sender * (n + 1) + events.receiver) * m) + events.theta
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        boundaries = np.nonzero(np.diff(sorted_keys))[0] + 1
        for chunk in np.split(order, boundaries):
            sender = int(events.sender[chunk[0]])
            receiver = int(events.receiver[chunk[0]])
            theta = int(events.theta[chunk[0]])
            per_pair.append(
                PairTally(sender, receiver, theta, int(chunk.size), int(events.t[chunk].max()))
            )
            per_agent[sender] += int(chunk.size)
    per_pair.sort(key=lambda x: (x.sender, x.receiver, x.theta))
    return CommReport(total=len(events), budget=budget, per_pair=per_pair, per_agent=per_agent)


def message_stats(messages: MessageLog, n: int, m: int, budget: int) -> dict:
    """Quantized-mode tallies: per (sender, hypothesis) counts and total bits."""
    per_sender: list[dict] = []
    if len(messages):
        for sender in range(1, n + 1):
            for theta in range(m):
                keep = (messages.sender == sender) & (messages.theta == theta)
                count = int(np.count_nonzero(keep))
                if count:
                    per_sender.append(
                        {
                            "sender": sender,
                            "theta_index": theta,
                            "count": count,
                            "last_t": int(messages.t[keep].max()),
                        }
                    )
    return {
        "total": len(messages),
        "budget": budget,
        "bits_total": int(messages.bits.sum()),
        "per_sender": per_sender,
    }


def normalization_drift(trace: RunTrace) -> float:
    """Largest |logsumexp| over every recorded belief and posterior row."""
    worst = 0.0
    for arr in (trace.log_mu, trace.log_pi):
        peak = arr.max(axis=2, keepdims=True)
        totals = peak[..., 0] + np.log(np.exp(arr - peak).sum(axis=2))
        worst = max(worst, float(np.max(np.abs(totals))))
    return worst


def tracker_monotone(trace: RunTrace) -> bool:
    """The lowest-heard tracker never increases in any coordinate."""
    return bool(np.all(np.diff(trace.log_mubar, axis=0) <= 0.0))


def endpoints_monotone(messages: MessageLog, n: int, m: int) -> bool:
    """Each (sender, hypothesis) endpoint sequence in the message log is non-increasing."""
    for sender in range(1, n + 1):
        for theta in range(m):
            keep = (messages.sender == sender) & (messages.theta == theta)
            values = messages.log_q_new[keep]
            if values.size > 1 and np.any(np.diff(values) > 0.0):
                return False
    return True
