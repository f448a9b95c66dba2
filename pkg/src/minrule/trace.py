"""Run artifacts: belief trajectories plus broadcast and message logs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _columns(rows: Sequence[tuple], width: int, dtypes) -> list[np.ndarray]:
    if rows:
        return [np.asarray(col, dtype=dt) for col, dt in zip(zip(*rows), dtypes)]
    return [np.empty(0, dtype=dt) for dt in dtypes]


@dataclass
class BroadcastLog:
    """One row per transmitted belief entry: (t, sender, receiver, theta, log value)."""

    t: np.ndarray
    sender: np.ndarray
    receiver: np.ndarray
    theta: np.ndarray
    log_value: np.ndarray

    @classmethod
    def from_rows(cls, rows: Sequence[tuple]) -> "BroadcastLog":
        cols = _columns(rows, 5, (np.int64, np.int64, np.int64, np.int64, np.float64))
        return cls(*cols)

    def __len__(self) -> int:
        return self.t.shape[0]


@dataclass
class MessageLog:
    """One row per quantized broadcast: (t, sender, theta, bin index, bits, new log endpoint).

    A quantized broadcast reaches every neighbor of the sender, so rows carry
    no receiver column.
    """

    t: np.ndarray
    sender: np.ndarray
    theta: np.ndarray
    index: np.ndarray
    bits: np.ndarray
    log_q_new: np.ndarray

    @classmethod
    def from_rows(cls, rows: Sequence[tuple]) -> "MessageLog":
        cols = _columns(rows, 6, (np.int64, np.int64, np.int64, np.int64, np.int64, np.float64))
        return cls(*cols)

    def __len__(self) -> int:
        return self.t.shape[0]


@dataclass
class RunTrace:
    """Everything one simulation run produced.

    Belief arrays have shape (len(times), n, m) and row k holds the state
    after step times[k] completed (times[0] == 0 is the prior). Agent ids map
    to axis 1 in ascending order; hypothesis labels map to axis 2.
    """

    algorithm: str
    seed: int
    horizon: int
    stride: int
    labels: tuple[str, ...]
    theta_star: int
    times: np.ndarray
    log_pi: np.ndarray
    log_mu: np.ndarray
    log_mubar: np.ndarray
    events: BroadcastLog | None = None
    messages: MessageLog | None = None
    alpha: float | None = None
    monitoring_times: tuple[int, ...] | None = None
    final_log_q: np.ndarray | None = None
    final_ledger: np.ndarray | None = None
    audit: dict | None = None
    summary: dict | None = None
    _row_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._row_index = {int(t): k for k, t in enumerate(self.times)}

    @property
    def n(self) -> int:
        return self.log_mu.shape[1]

    @property
    def m(self) -> int:
        return self.log_mu.shape[2]

    def row_for(self, t: int) -> int:
        """Trace row holding the state after step t; KeyError if t was not recorded."""
        try:
            return self._row_index[int(t)]
        except KeyError:
            raise KeyError(f"step {t} not recorded (stride {self.stride})") from None
