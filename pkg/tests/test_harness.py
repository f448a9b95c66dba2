"""Run orchestration, summaries, aggregates, bounds reports, and file outputs."""

import json
import math
from pathlib import Path

import pytest

from minrule import (
    ConfigError,
    LOG2,
    Scenario,
    aggregate_summaries,
    bounds_report,
    get_preset,
    render_beliefs_csv,
    render_events_csv,
    render_messages_csv,
    render_summary_json,
    resolve_scenario,
    run_scenario,
    sweep_scenario,
    write_run_outputs,
    write_sweep_outputs,
)

from conftest import line3_scenario

KL_LINE3 = 0.7 * math.log(0.7 / 0.6) + 0.3 * math.log(0.3 / 0.4)  # about 0.021601
POWER2 = {"family": "power", "value": 1.0, "exponent": 2.0}


class TestResolveScenario:
    def test_exactly_one_input_required(self):
        with pytest.raises(ConfigError):
            resolve_scenario()
        with pytest.raises(ConfigError):
            resolve_scenario(scenario={"x": 1}, preset="fig3")

    def test_preset_and_dict_and_model(self):
        assert resolve_scenario(preset="fig3").name == "fig3"
        cfg = line3_scenario()
        assert resolve_scenario(scenario=cfg) is cfg
        again = resolve_scenario(scenario=cfg.model_dump(mode="json"))
        assert again == cfg


class TestRunScenario:
    def test_summary_attached_with_expected_fields(self):
        trace = run_scenario(line3_scenario(threshold=POWER2), seed=0)
        s = trace.summary
        assert s["schema_version"] == 1
        assert s["algorithm"] == "event_triggered"
        assert s["seed"] == 0
        assert s["agents"] == 3
        assert s["true_state"] == "theta1"
        assert s["alpha"] == 1.0
        assert s["monitoring_count"] == 200
        assert len(s["final_mu_true"]) == 3
        assert s["consistency"]["window_steps"] == 20
        assert len(s["consistency"]["per_agent"]) == 3
        assert len(s["rates"]) == 3  # one false hypothesis, three agents
        assert s["invariants"]["tracker_monotone"] is True
        assert s["invariants"]["max_normalization_drift"] <= 1e-9
        assert s["audit"] is None

    def test_event_budget_counts_monitored_edge_slots(self):
        trace = run_scenario(line3_scenario(threshold=POWER2), seed=0)
        # 200 monitoring times, 2 edges both directions, 2 hypotheses.
        assert trace.summary["comm"]["budget"] == 200 * 4 * 2
        assert trace.summary["comm"]["total"] <= trace.summary["comm"]["budget"]

    def test_dense_budget(self):
        trace = run_scenario(line3_scenario(algorithm="dense", horizon=50), seed=0)
        assert trace.summary["comm"]["budget"] == 50 * 4 * 2
        assert trace.summary["comm"]["total"] == 50 * 4 * 2

    def test_quantized_budget_and_stats(self):
        trace = run_scenario(line3_scenario(algorithm="quantized", bits=1, horizon=50), seed=0)
        s = trace.summary
        assert s["comm"]["budget"] == 50 * 3 * 2
        assert s["comm"]["total"] == len(trace.messages)
        assert s["comm"]["bits_total"] == len(trace.messages)  # 1 bit each
        assert s["invariants"]["endpoints_monotone"] is True

    def test_time_varying_budget_handles_partial_period(self):
        cfg = line3_scenario(
            algorithm="time_varying",
            graph={"n": 3, "frames": [[[1, 2]], [[2, 3]]]},
            horizon=5,
        )
        trace = run_scenario(cfg, seed=0)
        # Two full periods of 4 + 4 slots, plus the first frame once more.
        assert trace.summary["comm"]["budget"] == 20

    def test_stride_override(self):
        trace = run_scenario(line3_scenario(), seed=0, stride=50)
        assert trace.times.tolist() == [0, 50, 100, 150, 200]
        with pytest.raises(ConfigError):
            run_scenario(line3_scenario(), seed=0, stride=0)

    def test_audit_flag_fills_summary(self):
        trace = run_scenario(line3_scenario(threshold=POWER2), seed=0, audit=True)
        assert trace.summary["audit"]["ledger_replay_matches"] is True

    def test_summary_json_is_deterministic(self):
        a = run_scenario(line3_scenario(threshold=POWER2), seed=3)
        b = run_scenario(line3_scenario(threshold=POWER2), seed=3)
        assert render_summary_json(a.summary) == render_summary_json(b.summary)


class TestSweep:
    def test_sweep_shapes(self):
        result = sweep_scenario(line3_scenario(threshold=POWER2), seeds=[0, 1, 2])
        assert result.seeds == [0, 1, 2]
        assert len(result.summaries) == 3
        assert result.traces is None
        assert result.aggregate["count"] == 3
        assert 0.0 <= result.aggregate["consistency_pass_rate"] <= 1.0

    def test_keep_traces(self):
        result = sweep_scenario(line3_scenario(), seeds=[0, 1], keep_traces=True)
        assert len(result.traces) == 2
        assert result.traces[0].seed == 0

    def test_empty_seed_list_rejected(self):
        with pytest.raises(ConfigError):
            sweep_scenario(line3_scenario(), seeds=[])


class TestAggregate:
    def _summary(self, seed, empirical, per_pair, total, consistent=True):
        return {
            "schema_version": 1,
            "name": "toy",
            "algorithm": "event_triggered",
            "seed": seed,
            "consistency": {"all": consistent},
            "rates": [
                {
                    "agent": 1,
                    "theta_index": 1,
                    "hypothesis": "b",
                    "empirical": empirical,
                    "bound": 0.4,
                }
            ],
            "comm": {"total": total, "per_pair": per_pair},
        }

    def test_spreads_and_zero_fill(self):
        pair = {"sender": 1, "receiver": 2, "theta_index": 0, "count": 3, "last_t": 9}
        agg = aggregate_summaries(
            [
                self._summary(0, 0.5, [pair], 3),
                self._summary(1, 0.7, [], 0, consistent=False),
            ]
        )
        assert agg["count"] == 2
        assert agg["seeds"] == [0, 1]
        assert agg["consistency_pass_rate"] == 0.5
        rate = agg["rates"][0]
        assert (rate["min"], rate["median"], rate["max"]) == (0.5, 0.6, 0.7)
        assert rate["bound"] == 0.4
        assert agg["broadcast_totals"] == {"min": 0, "median": 1.5, "max": 3}
        counts = agg["per_pair_counts"][0]
        # The pair absent from seed 1 aggregates as zero, not as missing.
        assert (counts["min"], counts["median"], counts["max"]) == (0, 1.5, 3)

    def test_quantized_aggregate_uses_per_sender(self):
        def summary(seed, count):
            return {
                "schema_version": 1,
                "name": "toy",
                "algorithm": "quantized",
                "seed": seed,
                "consistency": {"all": True},
                "rates": [],
                "comm": {
                    "total": count,
                    "per_sender": [
                        {"sender": 1, "theta_index": 1, "count": count, "last_t": 4}
                    ],
                },
            }

        agg = aggregate_summaries([summary(0, 2), summary(1, 6)])
        sender = agg["per_sender_counts"][0]
        assert (sender["min"], sender["median"], sender["max"]) == (2, 4, 6)


class TestBoundsReport:
    def test_fig3_event_bounds(self):
        report = bounds_report(get_preset("fig3"))
        assert report["alpha"] == 1.0
        assert report["warnings"] == []
        members = {(p["from"], p["to"]): p["agents"] for p in report["source_sets"]}
        assert members[("theta1", "theta2")] == [1]
        assert members[("theta2", "theta1")] == [1]
        for entry in report["event_bounds"]:
            assert entry["bound"] == pytest.approx(KL_LINE3, abs=1e-12)
        assert {e["agent"] for e in report["event_bounds"]} == {1, 2, 3}

    def test_fig4_quantized_bounds_and_bit_thresholds(self):
        report = bounds_report(get_preset("fig4"))
        (bound,) = report["quantized_bounds"]
        # KL = 0.6 * log 4 = 1.2 log 2 exceeds the 1-bit cap of log 2.
        assert bound["bits"] == 1
        assert bound["bound"] == pytest.approx(LOG2)
        for entry in report["bit_thresholds"]:
            assert entry["min_bits"] == pytest.approx(1.2)
            assert entry["configured"] == 1
            assert entry["sufficient"] is False

    def test_fig4_with_two_bits_is_sufficient(self):
        cfg = get_preset("fig4").model_copy(update={"bits": 2})
        report = bounds_report(cfg)
        (bound,) = report["quantized_bounds"]
        assert bound["bound"] == pytest.approx(1.2 * LOG2)
        assert all(entry["sufficient"] is True for entry in report["bit_thresholds"])

    def test_time_varying_rooted_union(self):
        cfg = line3_scenario(
            algorithm="time_varying",
            graph={"n": 3, "frames": [[[1, 2]], [[2, 3]]]},
        )
        report = bounds_report(cfg)
        assert report["rooted_unions"] == [{"hypothesis": "theta2", "rooted": True}]
        assert report["warnings"] == []

    def test_time_varying_isolated_source_warns(self):
        cfg = line3_scenario(
            algorithm="time_varying",
            graph={"n": 3, "frames": [[[2, 3]]]},
        )
        report = bounds_report(cfg)
        assert report["rooted_unions"] == [{"hypothesis": "theta2", "rooted": False}]
        assert any("not rooted" in w for w in report["warnings"])

    def test_unseparable_pair_warns(self):
        uniform = [[0.5, 0.5], [0.5, 0.5]]
        cfg = line3_scenario(
            agents=[{"id": i, "likelihoods": uniform} for i in (1, 2, 3)],
        )
        report = bounds_report(cfg)
        assert any("no agent separates" in w for w in report["warnings"])
        for entry in report["event_bounds"]:
            assert entry["bound"] == 0.0


class TestFileOutputs:
    def test_run_outputs_written_and_parse_back(self, tmp_path):
        trace = run_scenario(line3_scenario(threshold=POWER2, horizon=60), seed=0)
        written = write_run_outputs(trace, tmp_path)
        assert sorted(written) == ["beliefs.csv", "events.csv", "messages.csv", "summary.json"]

        beliefs = (tmp_path / "beliefs.csv").read_text(encoding="utf-8").splitlines()
        assert beliefs[0] == "t,agent,theta_index,log_mu,log_pi,log_mubar"
        assert len(beliefs) == 1 + len(trace.times) * 3 * 2
        t, agent, theta, log_mu, log_pi, log_mubar = beliefs[1].split(",")
        assert (t, agent, theta) == ("0", "1", "0")
        # repr formatting survives the round trip exactly
        assert float(log_mu) == trace.log_mu[0, 0, 0]

        events = (tmp_path / "events.csv").read_text(encoding="utf-8").splitlines()
        assert events[0] == "t,sender,receiver,theta_index,log_value"
        assert len(events) == 1 + len(trace.events)
        assert float(events[1].split(",")[4]) == trace.events.log_value[0]

        messages = (tmp_path / "messages.csv").read_text(encoding="utf-8").splitlines()
        assert messages == ["t,sender,theta_index,bin_index,bits,log_q_new"]

        summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert summary == json.loads(render_summary_json(trace.summary))

    def test_messages_csv_for_quantized(self, tmp_path):
        trace = run_scenario(line3_scenario(algorithm="quantized", bits=1, horizon=60), seed=0)
        write_run_outputs(trace, tmp_path)
        lines = (tmp_path / "messages.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1 + len(trace.messages)
        t, sender, theta, index, bits, log_q = lines[1].split(",")
        assert bits == "1"
        assert float(log_q) == trace.messages.log_q_new[0]

    def test_byte_identical_outputs_across_directories(self, tmp_path):
        cfg = line3_scenario(threshold=POWER2, horizon=80)
        first = write_run_outputs(run_scenario(cfg, seed=1), tmp_path / "a")
        second = write_run_outputs(run_scenario(cfg, seed=1), tmp_path / "b")
        for name in first:
            assert Path(first[name]).read_bytes() == Path(second[name]).read_bytes()

    def test_sweep_outputs(self, tmp_path):
        result = sweep_scenario(line3_scenario(horizon=50), seeds=[0, 1])
        written = write_sweep_outputs(result, tmp_path)
        assert sorted(written) == ["aggregate.json", "seed_0/summary.json", "seed_1/summary.json"]
        aggregate = json.loads((tmp_path / "aggregate.json").read_text(encoding="utf-8"))
        assert aggregate["count"] == 2
        assert json.loads((tmp_path / "seed_0" / "summary.json").read_text(encoding="utf-8"))[
            "seed"
        ] == 0
