"""Scenario schema validation, presets, YAML round-trips, and compilation."""

import numpy as np
import pytest
import yaml
from pydantic import ValidationError

from minrule import (
    ConfigError,
    Scenario,
    compile_scenario,
    get_preset,
    load_scenario,
    preset_list,
    scenario_to_yaml,
)

from conftest import line3_scenario, random_scenario


def _data(**overrides) -> dict:
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
    return data


def _error_locs(excinfo) -> list[tuple]:
    return [e["loc"] for e in excinfo.value.errors()]


class TestValidation:
    def test_minimal_scenario_accepted(self):
        cfg = Scenario.model_validate(_data())
        assert cfg.schema_version == 1
        assert cfg.seed == 0
        assert cfg.output.stride == 1

    def test_unknown_top_level_key(self):
        with pytest.raises(ValidationError) as excinfo:
            Scenario.model_validate(_data(typo_key=1))
        assert ("typo_key",) in _error_locs(excinfo)

    def test_unknown_nested_key_has_full_path(self):
        data = _data()
        data["agents"][1]["weight"] = 2.0
        with pytest.raises(ValidationError) as excinfo:
            Scenario.model_validate(data)
        assert ("agents", 1, "weight") in _error_locs(excinfo)

    def test_duplicate_hypothesis_labels(self):
        with pytest.raises(ValidationError, match="unique"):
            Scenario.model_validate(_data(hypotheses=["a", "a"]))

    def test_true_state_must_be_declared(self):
        with pytest.raises(ValidationError, match="true_state"):
            Scenario.model_validate(_data(true_state="theta9"))

    def test_agent_ids_must_cover_1_to_n(self):
        data = _data()
        data["agents"][2]["id"] = 5
        with pytest.raises(ValidationError, match="agent ids"):
            Scenario.model_validate(data)
        data = _data()
        data["agents"][2]["id"] = 1  # duplicate
        with pytest.raises(ValidationError, match="agent ids"):
            Scenario.model_validate(data)

    def test_likelihood_row_count_must_match_hypotheses(self):
        data = _data()
        data["agents"][0]["likelihoods"] = [[0.7, 0.3]]
        with pytest.raises(ValidationError, match="likelihood rows"):
            Scenario.model_validate(data)

    def test_likelihood_rows_must_share_width(self):
        data = _data()
        data["agents"][0]["likelihoods"] = [[0.7, 0.3], [0.2, 0.4, 0.4]]
        with pytest.raises(ValidationError, match="signal alphabet"):
            Scenario.model_validate(data)

    def test_prior_length(self):
        data = _data()
        data["agents"][0]["prior"] = [0.2, 0.3, 0.5]
        with pytest.raises(ValidationError, match="prior"):
            Scenario.model_validate(data)

    def test_graph_needs_exactly_one_topology(self):
        with pytest.raises(ValidationError, match="exactly one"):
            Scenario.model_validate(_data(graph={"n": 3}))
        with pytest.raises(ValidationError, match="exactly one"):
            Scenario.model_validate(
                _data(graph={"n": 3, "edges": [[1, 2]], "frames": [[[1, 2]]]})
            )

    def test_static_algorithms_reject_frames(self):
        data = _data(graph={"n": 3, "frames": [[[1, 2]], [[2, 3]]]})
        with pytest.raises(ValidationError, match="static graph"):
            Scenario.model_validate(data)

    def test_time_varying_accepts_frames(self):
        cfg = Scenario.model_validate(
            _data(
                algorithm="time_varying",
                graph={"n": 3, "frames": [[[1, 2]], [[2, 3]]]},
                threshold={"family": "constant", "value": 0.5},
            )
        )
        assert cfg.algorithm == "time_varying"

    def test_time_varying_requires_constant_threshold(self):
        data = _data(
            algorithm="time_varying",
            graph={"n": 3, "frames": [[[1, 2]]]},
            threshold={"family": "power", "value": 1.0, "exponent": 2.0},
        )
        with pytest.raises(ValidationError, match="constant threshold"):
            Scenario.model_validate(data)

    def test_non_event_triggered_schedule_must_stay_default(self):
        data = _data(algorithm="dense", schedule={"family": "constant", "param": 3})
        with pytest.raises(ValidationError, match="every step"):
            Scenario.model_validate(data)

    def test_quantized_bits_required_and_bounded(self):
        with pytest.raises(ValidationError, match="bits"):
            Scenario.model_validate(_data(algorithm="quantized"))
        with pytest.raises(ValidationError, match="bits"):
            Scenario.model_validate(_data(algorithm="quantized", bits=0))
        with pytest.raises(ValidationError, match="bits"):
            Scenario.model_validate(_data(algorithm="quantized", bits=53))
        cfg = Scenario.model_validate(_data(algorithm="quantized", bits=2))
        assert cfg.bits_per_hypothesis() == [2, 2]

    def test_per_hypothesis_bits_dict(self):
        cfg = Scenario.model_validate(
            _data(algorithm="quantized", bits={"theta1": 1, "theta2": 3})
        )
        assert cfg.bits_per_hypothesis() == [1, 3]
        with pytest.raises(ValidationError):
            Scenario.model_validate(_data(algorithm="quantized", bits={"theta1": 1}))

    def test_bits_forbidden_outside_quantized(self):
        with pytest.raises(ValidationError, match="quantized"):
            Scenario.model_validate(_data(bits=2))

    def test_consistency_window_shape(self):
        with pytest.raises(ValidationError, match="whole number"):
            Scenario.model_validate(_data(consistency={"window": 1.5}))
        cfg = Scenario.model_validate(_data(consistency={"window": 40}))
        assert cfg.consistency.window == 40

    def test_schedule_table_rules(self):
        with pytest.raises(ValidationError, match="table"):
            Scenario.model_validate(_data(schedule={"family": "custom"}))
        with pytest.raises(ValidationError, match="custom"):
            Scenario.model_validate(
                _data(schedule={"family": "constant", "param": 1, "table": [1]})
            )


class TestCompile:
    def test_models_sorted_by_agent_id(self):
        data = _data()
        data["agents"] = list(reversed(data["agents"]))
        compiled = compile_scenario(Scenario.model_validate(data))
        assert [model.agent for model in compiled.models] == [1, 2, 3]
        assert compiled.models[0].table[0, 0] == 0.7

    def test_uniform_prior_default(self):
        compiled = compile_scenario(line3_scenario())
        np.testing.assert_allclose(compiled.log_priors, np.log(0.5), atol=1e-15)

    def test_explicit_prior(self):
        data = _data()
        data["agents"][0]["prior"] = [0.25, 0.75]
        compiled = compile_scenario(Scenario.model_validate(data))
        np.testing.assert_allclose(np.exp(compiled.log_priors[0]), [0.25, 0.75])

    def test_bad_prior_rejected_at_compile(self):
        data = _data()
        data["agents"][0]["prior"] = [0.0, 1.0]
        with pytest.raises(ConfigError, match="prior"):
            compile_scenario(Scenario.model_validate(data))

    def test_disconnected_graph_rejected_for_static_algorithms(self):
        cfg = random_scenario(4, [[1, 2], [3, 4]])
        with pytest.raises(ConfigError, match="connected"):
            compile_scenario(cfg)

    def test_time_varying_allows_disconnected_frames(self):
        cfg = Scenario.model_validate(
            _data(algorithm="time_varying", graph={"n": 3, "frames": [[[1, 2]], [[2, 3]]]})
        )
        compiled = compile_scenario(cfg)
        assert compiled.graphs.period == 2
        assert compiled.schedule is None
        assert compiled.threshold is not None

    def test_event_triggered_gets_schedule_and_threshold(self):
        cfg = line3_scenario(
            schedule={"family": "exponential", "param": 2},
            threshold={"family": "power", "value": 1.0, "exponent": 2.0},
        )
        compiled = compile_scenario(cfg)
        assert compiled.schedule.times[:3] == (1, 3, 7)
        assert compiled.schedule.alpha == 0.25
        assert compiled.threshold.log_gamma(1) == 0.0

    def test_bits_array(self):
        cfg = line3_scenario(algorithm="quantized", bits={"theta1": 2, "theta2": 5})
        compiled = compile_scenario(cfg)
        assert compiled.bits.tolist() == [2, 5]

    def test_theta_star_index(self):
        compiled = compile_scenario(line3_scenario(true_state="theta2"))
        assert compiled.theta_star == 1


class TestPresets:
    def test_listing(self):
        names = [entry["name"] for entry in preset_list()]
        assert names == ["fig3", "fig4"]
        assert all(entry["description"] for entry in preset_list())

    def test_fig3_shape(self):
        cfg = get_preset("fig3")
        assert cfg.algorithm == "event_triggered"
        assert cfg.horizon == 4000
        assert cfg.threshold.exponent == 2.0
        assert cfg.agents[0].likelihoods == [[0.7, 0.3], [0.6, 0.4]]
        compile_scenario(cfg)  # must compile cleanly

    def test_fig4_shape(self):
        cfg = get_preset("fig4")
        assert cfg.algorithm == "quantized"
        assert cfg.bits == 1
        assert cfg.agents[0].likelihoods == [[0.8, 0.2], [0.2, 0.8]]
        compile_scenario(cfg)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            get_preset("fig99")


class TestYamlRoundTrip:
    def test_round_trip_preserves_model(self):
        cfg = get_preset("fig3")
        text = scenario_to_yaml(cfg)
        again = Scenario.model_validate(yaml.safe_load(text))
        assert again == cfg

    def test_load_scenario_from_file(self, tmp_path):
        path = tmp_path / "scenario.yaml"
        path.write_text(scenario_to_yaml(line3_scenario()), encoding="utf-8")
        cfg = load_scenario(path)
        assert cfg.name == "line3"
        assert cfg == line3_scenario()

    def test_load_scenario_rejects_non_mapping(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("- just\n- a\n- list\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="mapping"):
            load_scenario(path)
