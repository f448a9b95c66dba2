"""Shared scenario builders for the test suite."""

from __future__ import annotations

import numpy as np

from minrule import Scenario


def line3_scenario(**overrides) -> Scenario:
    """Three agents on a path; only agent 1 separates the two hypotheses."""
    data = {
        "name": "line3",
        "hypotheses": ["theta1", "theta2"],
        "true_state": "theta1",
        "agents": [
            {"id": 1, "likelihoods": [[0.7, 0.3], [0.6, 0.4]]},
            {"id": 2, "likelihoods": [[0.5, 0.5], [0.5, 0.5]]},
            {"id": 3, "likelihoods": [[0.5, 0.5], [0.5, 0.5]]},
        ],
        "graph": {"n": 3, "edges": [[1, 2], [2, 3]]},
        "algorithm": "event_triggered",
        "horizon": 200,
    }
    data.update(overrides)
    return Scenario.model_validate(data)


def random_models(n: int, m: int, signals: int, seed: int) -> list[dict]:
    """Strictly positive random likelihood tables, one agent dict per row."""
    rng = np.random.default_rng(seed)
    agents = []
    for i in range(1, n + 1):
        rows = rng.uniform(0.1, 1.0, size=(m, signals))
        rows /= rows.sum(axis=1, keepdims=True)
        agents.append({"id": i, "likelihoods": rows.tolist()})
    return agents


def random_scenario(
    n: int,
    edges: list[list[int]],
    *,
    m: int = 3,
    signals: int = 4,
    model_seed: int = 7,
    algorithm: str = "event_triggered",
    horizon: int = 200,
    **overrides,
) -> Scenario:
    labels = [f"h{k}" for k in range(1, m + 1)]
    data = {
        "name": "random",
        "hypotheses": labels,
        "true_state": labels[0],
        "agents": random_models(n, m, signals, model_seed),
        "graph": {"n": n, "edges": edges},
        "algorithm": algorithm,
        "horizon": horizon,
    }
    data.update(overrides)
    return Scenario.model_validate(data)
