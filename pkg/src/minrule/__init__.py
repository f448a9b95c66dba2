"""Deterministic simulator for min-rule belief diffusion over agent networks.

Agents repeatedly observe private signals, track the lowest belief they have
held or heard per hypothesis, and communicate sparsely: either event-triggered
full-precision broadcasts or adaptively quantized bin indices. The package
provides the update rules, the communication schemes, rate/consistency
metrics, a scenario layer with presets, an HTTP service, and a CLI client.
"""

__version__ = "0.1.0"

from .beliefs import (
    BeliefState,
    bayes_update,
    dense_baseline_step,
    log_normalize,
    log_sum_exp,
    min_rule_update,
    mubar_merge,
    mubar_merge_quantized,
)
from .engine import replay_audit, simulate
from .errors import (
    ConfigError,
    InvariantBreach,
    ModelViolation,
    ProtocolViolation,
    SimulatorError,
)
from .events import (
    EventSchedule,
    ThresholdFn,
    TriggerLedger,
    alpha_of,
    build_schedule,
    interval_fn,
    should_broadcast,
)
from .harness import (
    SweepResult,
    aggregate_summaries,
    bounds_report,
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
from .hypotheses import (
    HypothesisSet,
    LikelihoodModel,
    SourceSet,
    agent_rng,
    kl_divergence,
    sample_signal,
    sample_signals,
    source_sets,
)
from .metrics import (
    LOG2,
    CommReport,
    PairTally,
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
from .network import (
    UNREACHABLE,
    Graph,
    GraphSequence,
    complete_graph,
    distances,
    is_connected,
    path_graph,
    random_tree,
    ring_graph,
    union_rooted_at,
)
from .quantizer import (
    MAX_BITS,
    QuantMessage,
    decode_belief,
    encode_belief,
    parse_index,
    parse_message,
    quantize,
    serialize_index,
    serialize_message,
)
from .scenario import (
    CompiledScenario,
    Scenario,
    compile_scenario,
    get_preset,
    load_scenario,
    preset_list,
    scenario_to_yaml,
)
from .trace import BroadcastLog, MessageLog, RunTrace

__all__ = [name for name in dir() if not name.startswith("_")]
