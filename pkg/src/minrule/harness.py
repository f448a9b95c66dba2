"""Run and sweep orchestration: summaries, aggregates, and file outputs.

Outputs are pure functions of (scenario, seed): no timestamps, stable key
order, and repr-exact float formatting, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from statistics import median
from typing import Sequence

import numpy as np

from .engine import simulate
from .errors import ConfigError
from .hypotheses import SourceSet, source_sets
from .metrics import (
    comm_stats,
    consistency_check,
    empirical_rate,
    endpoints_monotone,
    message_stats,
    normalization_drift,
    rate_bound_event,
    rate_bound_quantized,
    required_bits,
    tracker_monotone,
)
from .network import distances, union_rooted_at
from .scenario import CompiledScenario, Scenario, compile_scenario, get_preset
from .trace import RunTrace

SUMMARY_SCHEMA_VERSION = 1


def resolve_scenario(scenario: dict | Scenario | None = None, preset: str | None = None) -> Scenario:
    """Exactly one of an inline scenario or a preset name."""
    if (scenario is None) == (preset is None):
        raise ConfigError("give exactly one of 'scenario' and 'preset'")
    if preset is not None:
        return get_preset(preset)
    if isinstance(scenario, Scenario):
        return scenario
    return Scenario.model_validate(scenario)


def run_scenario(
    cfg: Scenario,
    seed: int | None = None,
    *,
    stride: int | None = None,
    audit: bool = False,
) -> RunTrace:
    """Simulate once and attach the summary."""
    compiled = compile_scenario(cfg)
    if stride is not None:
        if stride < 1:
            raise ConfigError(f"stride must be >= 1, got {stride}")
        compiled = replace(compiled, stride=int(stride))
    trace = simulate(compiled, seed, audit=audit)
    trace.summary = build_summary(trace, compiled)
    return trace


def _dense_budget(compiled: CompiledScenario, trace: RunTrace) -> int:
    """Broadcast count if every considered (edge, hypothesis) always fired."""
    m = compiled.m
    if compiled.algorithm == "event_triggered":
        return len(compiled.schedule.times) * 2 * len(compiled.graphs.at(1).edges) * m
    if compiled.algorithm == "time_varying":
        per_period = sum(2 * len(frame.edges) * m for frame in compiled.graphs.frames)
        full, rest = divmod(compiled.horizon, compiled.graphs.period)
        tail = sum(2 * len(compiled.graphs.at(t).edges) * m for t in range(1, rest + 1))
        return full * per_period + tail
    if compiled.algorithm == "quantized":
        return compiled.horizon * compiled.n * m
    return compiled.horizon * 2 * len(compiled.graphs.at(1).edges) * m


def build_summary(trace: RunTrace, compiled: CompiledScenario) -> dict:
    sources = source_sets(compiled.models)
    consistent = consistency_check(
        trace, compiled.consistency_threshold, compiled.consistency_window
    )
    window = compiled.consistency_window
    window_steps = int(round(window * trace.horizon)) if window < 1.0 else int(window)

    dist = None
    if compiled.graphs.is_static:
        dist = distances(compiled.graphs.at(1))

    rates = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for theta in range(trace.m):
            if theta == trace.theta_star:
                continue
            for agent in range(1, trace.n + 1):
                entry = {
                    "agent": agent,
                    "theta_index": theta,
                    "hypothesis": trace.labels[theta],
                    "empirical": empirical_rate(trace, agent, theta),
                    "bound": None,
                }
                if trace.algorithm in ("event_triggered", "dense"):
                    entry["bound"] = rate_bound_event(
                        sources, dist, trace.alpha, trace.theta_star, theta, agent
                    )
                elif trace.algorithm == "quantized":
                    entry["bound"] = rate_bound_quantized(
                        sources, int(compiled.bits[theta]), trace.theta_star, theta
                    )
                rates.append(entry)

    comm: dict = {"budget": _dense_budget(compiled, trace)}
    if trace.algorithm == "quantized":
        stats = message_stats(trace.messages, trace.n, trace.m, comm["budget"])
        comm.update(stats)
        comm["logged"] = compiled.log_messages
    else:
        report = comm_stats(trace.events, trace.n, trace.m, comm["budget"])
        comm["total"] = report.total
        comm["per_pair"] = [
            {
                "sender": p.sender,
                "receiver": p.receiver,
                "theta_index": p.theta,
                "count": p.count,
                "last_t": p.last_t,
            }
            for p in report.per_pair
        ]
        comm["per_agent"] = {str(k): v for k, v in report.per_agent.items()}
        comm["logged"] = compiled.log_events

    invariants = {
        "max_normalization_drift": normalization_drift(trace),
        "tracker_monotone": tracker_monotone(trace),
        "truth_tracker_floor_log": float(trace.log_mubar[-1, :, trace.theta_star].min()),
    }
    if trace.algorithm == "quantized":
        invariants["endpoints_monotone"] = endpoints_monotone(trace.messages, trace.n, trace.m)

    final_mu_true = np.exp(trace.log_mu[-1, :, trace.theta_star])
    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "name": compiled.name,
        "algorithm": trace.algorithm,
        "seed": trace.seed,
        "horizon": trace.horizon,
        "stride": trace.stride,
        "agents": trace.n,
        "hypotheses": list(trace.labels),
        "true_state": trace.labels[trace.theta_star],
        "alpha": trace.alpha,
        "monitoring_count": None if trace.monitoring_times is None else len(trace.monitoring_times),
        "final_mu_true": [float(x) for x in final_mu_true],
        "consistency": {
            "threshold": compiled.consistency_threshold,
            "window_steps": window_steps,
            "per_agent": [bool(x) for x in consistent],
            "all": bool(consistent.all()),
        },
        "rates": rates,
        "comm": comm,
        "invariants": invariants,
        "audit": trace.audit,
    }
    return summary


@dataclass
class SweepResult:
    seeds: list[int]
    summaries: list[dict]
    aggregate: dict
    traces: list[RunTrace] | None = None


def sweep_scenario(
    cfg: Scenario,
    seeds: Sequence[int],
    *,
    stride: int | None = None,
    audit: bool = False,
    keep_traces: bool = False,
) -> SweepResult:
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    traces = []
    for seed in seeds:
        traces.append(run_scenario(cfg, seed, stride=stride, audit=audit))
    summaries = [trace.summary for trace in traces]
    aggregate = aggregate_summaries(summaries)
    return SweepResult(
        seeds=seeds,
        summaries=summaries,
        aggregate=aggregate,
        traces=traces if keep_traces else None,
    )


def _spread(values: Sequence[float]) -> dict:
    return {"min": min(values), "median": median(values), "max": max(values)}


def aggregate_summaries(summaries: Sequence[dict]) -> dict:
    """Min/median/max across seeds for rates, counts, and consistency."""
    first = summaries[0]
    rate_keys = [(r["agent"], r["theta_index"], r["hypothesis"]) for r in first["rates"]]
    rates = []
    for k, (agent, theta, label) in enumerate(rate_keys):
        values = [s["rates"][k]["empirical"] for s in summaries]
        rates.append(
            {
                "agent": agent,
                "theta_index": theta,
                "hypothesis": label,
                "bound": first["rates"][k]["bound"],
                **_spread(values),
            }
        )

    aggregate = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "name": first["name"],
        "algorithm": first["algorithm"],
        "seeds": [s["seed"] for s in summaries],
        "count": len(summaries),
        "consistency_pass_rate": sum(s["consistency"]["all"] for s in summaries) / len(summaries),
        "rates": rates,
        "broadcast_totals": _spread([s["comm"]["total"] for s in summaries]),
    }

    if first["algorithm"] == "quantized":
        keys = sorted(
            {(e["sender"], e["theta_index"]) for s in summaries for e in s["comm"]["per_sender"]}
        )
        per_sender = []
        for sender, theta in keys:
            values = []
            for s in summaries:
                match = [
                    e["count"]
                    for e in s["comm"]["per_sender"]
                    if (e["sender"], e["theta_index"]) == (sender, theta)
                ]
                values.append(match[0] if match else 0)
            per_sender.append({"sender": sender, "theta_index": theta, **_spread(values)})
        aggregate["per_sender_counts"] = per_sender
    else:
        keys = sorted(
            {
                (e["sender"], e["receiver"], e["theta_index"])
                for s in summaries
                for e in s["comm"]["per_pair"]
            }
        )
        per_pair = []
        for sender, receiver, theta in keys:
            values = []
            for s in summaries:
                match = [
                    e["count"]
                    for e in s["comm"]["per_pair"]
                    if (e["sender"], e["receiver"], e["theta_index"]) == (sender, receiver, theta)
                ]
                values.append(match[0] if match else 0)
            per_pair.append(
                {"sender": sender, "receiver": receiver, "theta_index": theta, **_spread(values)}
            )
        aggregate["per_pair_counts"] = per_pair
    return aggregate


def bounds_report(cfg: Scenario) -> dict:
    """Source sets, rate bounds, bit thresholds, and schedule reachability."""
    compiled = compile_scenario(cfg)
    sources = source_sets(compiled.models)
    labels = compiled.labels
    star = compiled.theta_star
    caught: list[str] = []

    pairs = []
    for p in range(compiled.m):
        for q in range(compiled.m):
            if p == q:
                continue
            members = sources.members(p, q)
            pairs.append(
                {
                    "from": labels[p],
                    "to": labels[q],
                    "agents": list(members),
                    "divergences": [sources.divergence(v, p, q) for v in members],
                }
            )
            if not members and p == star:
                caught.append(f"no agent separates {labels[p]} from {labels[q]}; bound is 0")

    report: dict = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "name": compiled.name,
        "algorithm": compiled.algorithm,
        "true_state": labels[star],
        "source_sets": pairs,
        "warnings": caught,
    }

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if compiled.algorithm in ("event_triggered", "dense"):
            alpha = compiled.schedule.alpha if compiled.schedule else 1.0
            dist = distances(compiled.graphs.at(1))
            report["alpha"] = alpha
            report["event_bounds"] = [
                {
                    "agent": agent,
                    "hypothesis": labels[theta],
                    "bound": rate_bound_event(sources, dist, alpha, star, theta, agent),
                }
                for theta in range(compiled.m)
                if theta != star
                for agent in range(1, compiled.n + 1)
            ]
        if compiled.algorithm == "quantized":
            report["quantized_bounds"] = [
                {
                    "hypothesis": labels[theta],
                    "bits": int(compiled.bits[theta]),
                    "bound": rate_bound_quantized(sources, int(compiled.bits[theta]), star, theta),
                }
                for theta in range(compiled.m)
                if theta != star
            ]
        thresholds = []
        for theta in range(compiled.m):
            needed = required_bits(sources, theta)
            configured = None if compiled.bits is None else int(compiled.bits[theta])
            thresholds.append(
                {
                    "hypothesis": labels[theta],
                    "min_bits": needed,
                    "configured": configured,
                    "sufficient": None if configured is None else bool(configured >= needed),
                }
            )
        report["bit_thresholds"] = thresholds

    if compiled.algorithm == "time_varying":
        rooted = []
        for theta in range(compiled.m):
            if theta == star:
                continue
            members = sources.members(star, theta)
            ok = bool(members) and union_rooted_at(compiled.graphs, 1, members)
            rooted.append({"hypothesis": labels[theta], "rooted": ok})
            if not ok:
                caught.append(
                    f"schedule union is not rooted at the sources separating "
                    f"{labels[star]} from {labels[theta]}"
                )
        report["rooted_unions"] = rooted
    return report


# -- file rendering -------------------------------------------------------------


def render_beliefs_csv(trace: RunTrace) -> str:
    lines = ["t,agent,theta_index,log_mu,log_pi,log_mubar"]
    times = trace.times.tolist()
    for k, t in enumerate(times):
        mu, pi, mubar = trace.log_mu[k], trace.log_pi[k], trace.log_mubar[k]
        for i in range(trace.n):
            for theta in range(trace.m):
                lines.append(
                    f"{t},{i + 1},{theta},"
                    f"{float(mu[i, theta])!r},{float(pi[i, theta])!r},{float(mubar[i, theta])!r}"
                )
    return "\n".join(lines) + "\n"


def render_events_csv(trace: RunTrace) -> str:
    lines = ["t,sender,receiver,theta_index,log_value"]
    ev = trace.events
    if ev is not None:
        for r in range(len(ev)):
            lines.append(
                f"{ev.t[r]},{ev.sender[r]},{ev.receiver[r]},{ev.theta[r]},{float(ev.log_value[r])!r}"
            )
    return "\n".join(lines) + "\n"


def render_messages_csv(trace: RunTrace) -> str:
    lines = ["t,sender,theta_index,bin_index,bits,log_q_new"]
    ms = trace.messages
    if ms is not None:
        for r in range(len(ms)):
            lines.append(
                f"{ms.t[r]},{ms.sender[r]},{ms.theta[r]},{ms.index[r]},{ms.bits[r]},"
                f"{float(ms.log_q_new[r])!r}"
            )
    return "\n".join(lines) + "\n"


def render_summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def write_run_outputs(trace: RunTrace, outdir: str | Path) -> dict[str, str]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {
        "beliefs.csv": render_beliefs_csv(trace),
        "events.csv": render_events_csv(trace),
        "messages.csv": render_messages_csv(trace),
        "summary.json": render_summary_json(trace.summary),
    }
    written = {}
    for name, content in files.items():
        path = outdir / name
        path.write_text(content, encoding="utf-8")
        written[name] = str(path)
    return written


def write_sweep_outputs(result: SweepResult, outdir: str | Path) -> dict[str, str]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = {}
    for seed, summary in zip(result.seeds, result.summaries):
        path = outdir / f"seed_{seed}" / "summary.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render_summary_json(summary), encoding="utf-8")
        written[f"seed_{seed}/summary.json"] = str(path)
    path = outdir / "aggregate.json"
    path.write_text(render_summary_json(result.aggregate), encoding="utf-8")
    written["aggregate.json"] = str(path)
    return written
