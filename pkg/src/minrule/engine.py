"""Vectorized simulation loop for all four communication schemes.

One step is always: observe a signal, condition the private posterior, form
the actual belief as the normalized min of tracker and posterior, then run
the scheme's communication phase and fold whatever was heard into the
lowest-heard tracker. State lives in (n, m) float64 arrays in log domain;
signals are pre-sampled per agent from independent substreams so results are
reproducible for any (scenario, seed) regardless of chunking.

The per-agent update ops in beliefs.py define the semantics; this module is
the fast path, and the test suite pins the two against each other.
"""

from __future__ import annotations

import numpy as np

from .errors import InvariantBreach, ProtocolViolation
from .events import TriggerLedger, should_broadcast
from .hypotheses import agent_rng, sample_signals
from .network import Graph
from .quantizer import decode_belief, encode_belief, parse_message, serialize_message, QuantMessage
from .scenario import CompiledScenario
from .trace import BroadcastLog, MessageLog, RunTrace

# Mid-run abort threshold on |logsumexp| of a freshly normalized belief.
DRIFT_ABORT = 1e-6


def _directed_edges(graph: Graph) -> tuple[np.ndarray, np.ndarray]:
    """0-based (src, dst) arrays listing both directions of every edge."""
    src, dst = [], []
    for a, b in graph.edges:
        src += [a - 1, b - 1]
        dst += [b - 1, a - 1]
    return np.asarray(src, dtype=np.intp), np.asarray(dst, dtype=np.intp)


def _neighbor_matrix(graph: Graph) -> np.ndarray:
    """Padded (n, max_degree) neighbor index matrix.

    Padding slots point at row n, a sentinel row callers keep at +inf so a
    plain min-reduce over the row ignores them.
    """
    width = max((len(x) for x in graph.neighbors), default=0)
    idx = np.full((graph.n, max(width, 1)), graph.n, dtype=np.intp)
    for i, nbrs in enumerate(graph.neighbors):
        for k, v in enumerate(nbrs):
            idx[i, k] = v - 1
    return idx


class _Columns:
    """Append-only column store; concatenated once at the end of a run."""

    def __init__(self, count: int):
        self.parts: list[list[np.ndarray]] = [[] for _ in range(count)]

    def append(self, *cols) -> None:
        for store, col in zip(self.parts, cols):
            store.append(col)

    def concat(self, dtypes) -> list[np.ndarray]:
        return [
            np.concatenate(store) if store else np.empty(0, dtype=dt)
            for store, dt in zip(self.parts, dtypes)
        ]


class _Run:
    def __init__(self, compiled: CompiledScenario, seed: int, audit: bool):
        self.c = compiled
        self.seed = seed
        self.audit = audit
        n, m, horizon = compiled.n, compiled.m, compiled.horizon

        # Pre-sample every agent's signal path and gather log-likelihood rows.
        self.loglik = np.zeros((horizon + 1, n, m))
        for i, model in enumerate(compiled.models):
            rng = agent_rng(seed, i)
            signals = sample_signals(model, compiled.theta_star, rng, horizon)
            self.loglik[1:, i, :] = model.log_table[:, signals].T

        self.log_pi = compiled.log_priors.copy()
        self.log_mu = compiled.log_priors.copy()
        self.log_mubar = compiled.log_priors.copy()
        self._exp_buf = np.empty((n, m))

        stride = compiled.stride
        recorded = sorted({0, horizon, *range(0, horizon + 1, stride)})
        self.times = np.asarray(recorded, dtype=np.int64)
        self._record = np.zeros(horizon + 1, dtype=bool)
        self._record[self.times] = True
        shape = (len(recorded), n, m)
        self.tr_pi = np.empty(shape)
        self.tr_mu = np.empty(shape)
        self.tr_mubar = np.empty(shape)
        self._row = 0

        self.events = _Columns(5)
        # Message rows arrive one at a time; scalar lists beat tiny-array appends.
        self.messages: list[tuple] = []
        self.ledger: np.ndarray | None = None
        self.log_q: np.ndarray | None = None
        self._recv_log_q: np.ndarray | None = None

    # -- shared per-step pieces ------------------------------------------------

    def _normalize_rows(self, arr: np.ndarray) -> None:
        peak = arr.max(axis=1, keepdims=True)
        np.exp(arr - peak, out=self._exp_buf)
        total = self._exp_buf.sum(axis=1, keepdims=True)
        np.log(total, out=total)
        arr -= peak + total

    def _max_abs_lse(self, arr: np.ndarray) -> float:
        peak = arr.max(axis=1, keepdims=True)
        np.exp(arr - peak, out=self._exp_buf)
        total = self._exp_buf.sum(axis=1)
        return float(np.max(np.abs(peak[:, 0] + np.log(total))))

    def _local_update(self, t: int) -> None:
        self.log_pi += self.loglik[t]
        self._normalize_rows(self.log_pi)
        np.minimum(self.log_mubar, self.log_pi, out=self.log_mu)
        self._normalize_rows(self.log_mu)
        # Checking log_mu suffices mid-run: a bad log_pi enters the min above
        # and trips here the same step. The recorded trace gets a full pass
        # over both arrays afterwards.
        drift = self._max_abs_lse(self.log_mu)
        if not drift <= DRIFT_ABORT:  # also trips on nan
            raise InvariantBreach(f"normalization drift {drift!r} exceeds {DRIFT_ABORT}", step=t)

    def _record_row(self, t: int) -> None:
        if self._record[t]:
            self.tr_pi[self._row] = self.log_pi
            self.tr_mu[self._row] = self.log_mu
            self.tr_mubar[self._row] = self.log_mubar
            self._row += 1

    def _merge_fired(self, t: int, src: np.ndarray, dst: np.ndarray, fired: np.ndarray, values: np.ndarray) -> None:
        """Log fired (edge, hypothesis) broadcasts, update the ledger, merge at receivers."""
        edge_rows, thetas = np.nonzero(fired)
        senders = src[edge_rows]
        receivers = dst[edge_rows]
        sent = values[edge_rows, thetas]
        self.ledger[senders, receivers, thetas] = sent
        if self.c.log_events:
            self.events.append(
                np.full(edge_rows.shape[0], t, dtype=np.int64),
                (senders + 1).astype(np.int64),
                (receivers + 1).astype(np.int64),
                thetas.astype(np.int64),
                sent,
            )
        heard = np.where(fired, values, np.inf)
        acc = np.full_like(self.log_mubar, np.inf)
        np.minimum.at(acc, dst, heard)
        np.minimum(self.log_mubar, self.log_mu, out=self.log_mubar)
        np.minimum(self.log_mubar, acc, out=self.log_mubar)

    def _merge_quiet(self) -> None:
        np.minimum(self.log_mubar, self.log_mu, out=self.log_mubar)

    # -- algorithm loops --------------------------------------------------------

    def _loop_event_triggered(self) -> None:
        c = self.c
        graph = c.graphs.at(1)
        src, dst = _directed_edges(graph)
        self.ledger = np.zeros((c.n, c.n, c.m))
        monitor = np.zeros(c.horizon + 1, dtype=bool)
        log_gamma = np.zeros(c.horizon + 1)
        for t in c.schedule.times:
            monitor[t] = True
            log_gamma[t] = c.threshold.log_gamma(t)
        for t in range(1, c.horizon + 1):
            self._local_update(t)
            if monitor[t]:
                values = self.log_mu[src]
                if t == 1:
                    fired = np.ones_like(values, dtype=bool)
                else:
                    floor = np.minimum(self.ledger[src, dst], self.ledger[dst, src])
                    fired = values < log_gamma[t] + floor
                if fired.any():
                    self._merge_fired(t, src, dst, fired, values)
                else:
                    self._merge_quiet()
            else:
                self._merge_quiet()
            self._record_row(t)

    def _loop_time_varying(self) -> None:
        c = self.c
        frames = [_directed_edges(frame) for frame in c.graphs.frames]
        self.ledger = np.zeros((c.n, c.n, c.m))
        log_gamma = c.threshold.log_gamma(1)  # constant family
        period = c.graphs.period
        for t in range(1, c.horizon + 1):
            self._local_update(t)
            src, dst = frames[(t - 1) % period]
            if src.size:
                values = self.log_mu[src]
                floor = np.minimum(self.ledger[src, dst], self.ledger[dst, src])
                fired = values < log_gamma + floor
                if fired.any():
                    self._merge_fired(t, src, dst, fired, values)
                else:
                    self._merge_quiet()
            else:
                self._merge_quiet()
            self._record_row(t)

    def _loop_dense(self) -> None:
        c = self.c
        graph = c.graphs.at(1)
        src, dst = _directed_edges(graph)
        nbr_idx = _neighbor_matrix(graph)
        count = src.shape[0] * c.m
        senders = np.repeat(src + 1, c.m).astype(np.int64)
        receivers = np.repeat(dst + 1, c.m).astype(np.int64)
        thetas = np.tile(np.arange(c.m, dtype=np.int64), src.shape[0])
        mu_ext = np.full((c.n + 1, c.m), np.inf)  # sentinel row for padding slots
        for t in range(1, c.horizon + 1):
            self._local_update(t)
            if c.log_events:
                self.events.append(
                    np.full(count, t, dtype=np.int64),
                    senders,
                    receivers,
                    thetas,
                    self.log_mu[src].ravel(),
                )
            mu_ext[: c.n] = self.log_mu
            heard = mu_ext[nbr_idx].min(axis=1)
            np.minimum(self.log_mubar, self.log_mu, out=self.log_mubar)
            np.minimum(self.log_mubar, heard, out=self.log_mubar)
            self._record_row(t)

    def _loop_quantized(self) -> None:
        c = self.c
        graph = c.graphs.at(1)
        nbr_idx = _neighbor_matrix(graph)
        bits = [int(b) for b in c.bits]
        q_ext = np.zeros((c.n + 1, c.m))  # endpoints start at log 1 = 0
        q_ext[c.n] = np.inf  # sentinel row for padding slots
        self.log_q = q_ext[: c.n]
        if self.audit:
            self._recv_log_q = np.zeros((c.n, c.m))
        for t in range(1, c.horizon + 1):
            self._local_update(t)
            gate = self.log_mu < self.log_q
            if gate.any():
                rows, thetas = np.nonzero(gate)
                for i, theta in zip(rows.tolist(), thetas.tolist()):
                    log_q_new, index = encode_belief(
                        self.log_q[i, theta], self.log_mu[i, theta], bits[theta]
                    )
                    self.log_q[i, theta] = log_q_new
                    if c.log_messages:
                        self.messages.append((t, i + 1, theta, index, bits[theta], log_q_new))
                    if self.audit:
                        self._audit_message(t, i, theta, index, bits[theta], log_q_new)
                if self.audit and not np.array_equal(self.log_q, self._recv_log_q):
                    raise ProtocolViolation(f"sender and receiver endpoint views diverged at step {t}")
            heard = q_ext[nbr_idx].min(axis=1)
            np.minimum(self.log_mubar, self.log_mu, out=self.log_mubar)
            np.minimum(self.log_mubar, heard, out=self.log_mubar)
            self._record_row(t)

    def _audit_message(self, t: int, i: int, theta: int, index: int, width: int, log_q_new: float) -> None:
        """Receiver-side view: decode the wire bytes against an independent endpoint array."""
        message = parse_message(serialize_message(QuantMessage(sender=i + 1, theta=theta, index=index, bits=width)))
        decoded = decode_belief(self._recv_log_q[i, theta], message.index, message.bits)
        if decoded != log_q_new:
            raise ProtocolViolation(f"decode mismatch at step {t} for agent {i + 1}")
        if decoded < self.log_mu[i, theta]:
            raise ProtocolViolation(f"endpoint fell below the belief at step {t} for agent {i + 1}")
        self._recv_log_q[i, theta] = decoded

    # -- assembly ---------------------------------------------------------------

    def execute(self) -> RunTrace:
        self.tr_pi[0] = self.log_pi
        self.tr_mu[0] = self.log_mu
        self.tr_mubar[0] = self.log_mubar
        self._row = 1

        loop = {
            "event_triggered": self._loop_event_triggered,
            "time_varying": self._loop_time_varying,
            "dense": self._loop_dense,
            "quantized": self._loop_quantized,
        }[self.c.algorithm]
        loop()

        events = BroadcastLog(
            *self.events.concat((np.int64, np.int64, np.int64, np.int64, np.float64))
        )
        messages = MessageLog.from_rows(self.messages)
        alpha = None
        if self.c.algorithm == "event_triggered":
            alpha = self.c.schedule.alpha
        elif self.c.algorithm == "dense":
            alpha = 1.0
        return RunTrace(
            algorithm=self.c.algorithm,
            seed=self.seed,
            horizon=self.c.horizon,
            stride=self.c.stride,
            labels=self.c.labels,
            theta_star=self.c.theta_star,
            times=self.times,
            log_pi=self.tr_pi,
            log_mu=self.tr_mu,
            log_mubar=self.tr_mubar,
            events=events,
            messages=messages,
            alpha=alpha,
            monitoring_times=self.c.schedule.times if self.c.schedule else None,
            final_log_q=None if self.log_q is None else self.log_q.copy(),
            final_ledger=None if self.ledger is None else self.ledger.copy(),
        )


def simulate(compiled: CompiledScenario, seed: int | None = None, *, audit: bool = False) -> RunTrace:
    """Run one simulation to the horizon; deterministic in (scenario, seed)."""
    actual_seed = compiled.seed if seed is None else int(seed)
    trace = _Run(compiled, actual_seed, audit).execute()
    if audit:
        trace.audit = replay_audit(trace, compiled)
    return trace


def replay_audit(trace: RunTrace, compiled: CompiledScenario) -> dict:
    """Re-check every logged broadcast with the scalar decision ops.

    Independent of the vectorized loop: the trigger ledger is rebuilt from
    the event log alone via should_broadcast / decode_belief, then compared
    bitwise against the engine's final state. Raises ProtocolViolation on the
    first inconsistency.
    """
    result: dict = {"events_checked": 0, "messages_checked": 0}
    if trace.algorithm in ("event_triggered", "time_varying"):
        result["ledger_replay_matches"] = _replay_events(trace, compiled)
        result["events_checked"] = len(trace.events)
    if trace.algorithm == "quantized":
        result["endpoint_replay_matches"] = _replay_messages(trace, compiled)
        result["messages_checked"] = len(trace.messages)
    return result


def _replay_events(trace: RunTrace, compiled: CompiledScenario) -> bool:
    log = trace.events
    shadow = TriggerLedger(compiled.n, compiled.m)
    unconditional_first = trace.algorithm == "event_triggered"
    k = 0
    while k < len(log):
        t = int(log.t[k])
        stop = k
        while stop < len(log) and log.t[stop] == t:
            stop += 1
        frame = compiled.graphs.at(t)
        edges = set(frame.edges)
        for r in range(k, stop):
            sender, receiver = int(log.sender[r]), int(log.receiver[r])
            theta, value = int(log.theta[r]), float(log.log_value[r])
            if (min(sender, receiver), max(sender, receiver)) not in edges:
                raise ProtocolViolation(f"broadcast on a non-edge ({sender}, {receiver}) at step {t}")
            mu_row = trace.log_mu[trace.row_for(t)]
            if value != mu_row[sender - 1, theta]:
                raise ProtocolViolation(f"logged value differs from the belief at step {t}")
            if not (t == 1 and unconditional_first):
                if not should_broadcast(shadow, sender, receiver, theta, value, t, compiled.threshold):
                    raise ProtocolViolation(
                        f"logged broadcast fails the trigger test: step {t}, {sender}->{receiver}"
                    )
        for r in range(k, stop):
            shadow.record(int(log.sender[r]), int(log.receiver[r]), int(log.theta[r]), float(log.log_value[r]))
        k = stop
    return bool(np.array_equal(shadow.values, trace.final_ledger))


def _replay_messages(trace: RunTrace, compiled: CompiledScenario) -> bool:
    log = trace.messages
    shadow = np.zeros((trace.n, trace.m))
    for r in range(len(log)):
        t, sender = int(log.t[r]), int(log.sender[r])
        theta, index, width = int(log.theta[r]), int(log.index[r]), int(log.bits[r])
        if width != int(compiled.bits[theta]):
            raise ProtocolViolation(f"bit width mismatch at step {t}")
        wire = serialize_message(QuantMessage(sender=sender, theta=theta, index=index, bits=width))
        message = parse_message(wire)
        if message != QuantMessage(sender=sender, theta=theta, index=index, bits=width):
            raise ProtocolViolation(f"wire round-trip mismatch at step {t}")
        mu = float(trace.log_mu[trace.row_for(t), sender - 1, theta])
        if not mu < shadow[sender - 1, theta]:
            raise ProtocolViolation(f"broadcast without the gate condition at step {t}")
        decoded = decode_belief(float(shadow[sender - 1, theta]), index, width)
        if decoded != float(log.log_q_new[r]):
            raise ProtocolViolation(f"endpoint replay mismatch at step {t}")
        if decoded < mu:
            raise ProtocolViolation(f"endpoint fell below the belief at step {t}")
        shadow[sender - 1, theta] = decoded
    return bool(np.array_equal(shadow, trace.final_log_q))
