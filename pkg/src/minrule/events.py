"""Monitoring schedules, trigger thresholds, and the broadcast decision rule.

Agents only consider communicating at monitoring steps t_1=1, t_{k+1}=t_k+g(k)
for a non-decreasing integer gap function g. At a monitoring step, agent i
sends its belief about one hypothesis to neighbor j only if that belief has
dropped strictly below a decaying fraction of the smaller of the two values
last exchanged on the (i, j) pair. The gap function also fixes the rate
constant alpha that scales the achievable rejection exponents.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, ProtocolViolation

# Evaluation point and degeneracy cutoff for the numeric rate-constant estimate.
ALPHA_EVAL_T = 1.0e6
ALPHA_DEGENERATE = 1e-6


@dataclass(frozen=True)
class ThresholdFn:
    """Non-increasing trigger factor gamma(t) with range (0, 1].

    Two families, both sub-exponential by construction (log(1/gamma(t))/t -> 0):

    * constant: gamma(t) = value, with 0 < value <= 1
    * power:    gamma(t) = min(1, value * t**-exponent), value > 0, exponent >= 0
    """

    family: str
    value: float
    exponent: float = 0.0

    def __post_init__(self):
        if self.family == "constant":
            if not (0.0 < self.value <= 1.0):
                raise ConfigError(f"constant threshold must lie in (0, 1], got {self.value}")
        elif self.family == "power":
            if self.value <= 0.0:
                raise ConfigError("power threshold needs a positive scale")
            if self.exponent < 0.0:
                raise ConfigError("power threshold needs a nonnegative exponent")
        else:
            raise ConfigError(f"unknown threshold family {self.family!r}")

    @classmethod
    def constant(cls, value: float) -> "ThresholdFn":
        return cls(family="constant", value=value)

    @classmethod
    def power(cls, scale: float, exponent: float) -> "ThresholdFn":
        return cls(family="power", value=scale, exponent=exponent)

    def log_gamma(self, t: int) -> float:
        if t < 1:
            raise ConfigError(f"steps start at 1, got {t}")
        if self.family == "constant":
            return math.log(self.value)
        return min(0.0, math.log(self.value) - self.exponent * math.log(t))

    def __call__(self, t: int) -> float:
        return math.exp(self.log_gamma(t))


def interval_fn(family: str, param: float | None, table: Sequence[int] | None) -> Callable[[int], int]:
    """The gap function g(k) for k >= 1; custom tables extend with their last entry."""
    if family == "constant":
        gap = _as_positive_int(param, "constant gap")
        return lambda k: gap
    if family == "polynomial":
        p = _as_positive_int(param, "polynomial degree")
        return lambda k: k**p
    if family == "exponential":
        p = _as_positive_int(param, "exponential base")
        return lambda k: p**k
    if family == "custom":
        values = _validated_table(table)
        return lambda k: values[min(k, len(values)) - 1]
    raise ConfigError(f"unknown schedule family {family!r}")


def _as_positive_int(value, what: str) -> int:
    if value is None:
        raise ConfigError(f"{what} requires a parameter")
    if float(value) != int(value) or int(value) < 1:
        raise ConfigError(f"{what} must be a positive integer, got {value!r}")
    return int(value)


def _validated_table(table) -> tuple[int, ...]:
    if not table:
        raise ConfigError("custom schedule requires a non-empty gap table")
    values = tuple(_as_positive_int(v, "custom gap entry") for v in table)
    for a, b in zip(values, values[1:]):
        if b < a:
            raise ConfigError("custom gap table must be non-decreasing")
    return values


@dataclass(frozen=True)
class EventSchedule:
    """Monitoring times within a horizon plus the schedule's rate constant."""

    family: str
    param: float | None
    table: tuple[int, ...] | None
    horizon: int
    times: tuple[int, ...]
    alpha: float

    @property
    def count(self) -> int:
        return len(self.times)


def build_schedule(
    family: str,
    horizon: int,
    *,
    param: float | None = None,
    table: Sequence[int] | None = None,
) -> EventSchedule:
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    g = interval_fn(family, param, table)
    times = []
    t, k = 1, 1
    while t <= horizon:
        times.append(t)
        t += g(k)
        k += 1
    return EventSchedule(
        family=family,
        param=None if param is None else float(param),
        table=None if table is None else tuple(int(v) for v in table),
        horizon=horizon,
        times=tuple(times),
        alpha=alpha_of(family, param=param, table=table),
    )


def alpha_of(
    family: str,
    *,
    param: float | None = None,
    table: Sequence[int] | None = None,
) -> float:
    """Rate constant of a monitoring schedule.

    Closed forms: 1 for constant gaps and polynomial gaps k**p, 1/p**2 for
    exponential gaps p**k. Custom tables fall back to a numeric estimate with
    relative tolerance about 1e-4 (exact piecewise-linear integration of the
    gap function, inverted and evaluated at t = ALPHA_EVAL_T).
    """
    if family == "constant":
        _as_positive_int(param, "constant gap")
        return 1.0
    if family == "polynomial":
        _as_positive_int(param, "polynomial degree")
        return 1.0
    if family == "exponential":
        p = _as_positive_int(param, "exponential base")
        return 1.0 / (p * p)
    if family == "custom":
        return _alpha_numeric(_validated_table(table))
    raise ConfigError(f"unknown schedule family {family!r}")


def _alpha_numeric(values: tuple[int, ...], t_eval: float = ALPHA_EVAL_T) -> float:
    """Estimate lim G(G^-1(t) - 2)/t for g interpolated linearly through the
    table knots and held constant past the final entry."""
    knots = np.arange(1, len(values) + 1, dtype=np.float64)
    gaps = np.asarray(values, dtype=np.float64)
    # Exact integral of the piecewise-linear interpolant at each knot.
    cumulative = np.concatenate([[0.0], np.cumsum((gaps[:-1] + gaps[1:]) / 2.0)])
    last_knot, last_gap, last_cum = knots[-1], gaps[-1], cumulative[-1]

    def big_g(z: float) -> float:
        if z <= 1.0:
            return gaps[0] * (z - 1.0)
        if z >= last_knot:
            return last_cum + last_gap * (z - last_knot)
        k = int(math.floor(z))
        frac = z - k
        slope = gaps[k] - gaps[k - 1] if k < len(values) else 0.0
        return cumulative[k - 1] + frac * gaps[k - 1] + 0.5 * frac * frac * slope

    def big_g_inverse(t: float) -> float:
        if t >= last_cum:
            return last_knot + (t - last_cum) / last_gap
        return float(brentq(lambda z: big_g(z) - t, 1.0, last_knot, xtol=1e-9))

    alpha = big_g(big_g_inverse(t_eval) - 2.0) / t_eval
    alpha = max(alpha, 0.0)
    if alpha < ALPHA_DEGENERATE:
        warnings.warn(
            "schedule rate constant is ~0; exponential-rate guarantees degenerate",
            RuntimeWarning,
            stacklevel=2,
        )
    return alpha


class TriggerLedger:
    """Last log-belief each ordered (sender, receiver) pair exchanged, per hypothesis.

    Values start at 0.0 (= log 1), which is the correct "never exchanged"
    default for time-varying schedules; static runs overwrite every tracked
    pair during the unconditional first monitoring round before any trigger
    check reads the ledger.
    """

    def __init__(self, n: int, m: int):
        if n < 1 or m < 1:
            raise ConfigError("ledger needs n >= 1 agents and m >= 1 hypotheses")
        self.n = n
        self.m = m
        self.values = np.zeros((n, n, m), dtype=np.float64)

    def last_sent(self, sender: int, receiver: int, theta: int) -> float:
        return float(self.values[sender - 1, receiver - 1, theta])

    def record(self, sender: int, receiver: int, theta: int, log_value: float) -> None:
        if log_value > 0.0:
            raise ProtocolViolation("ledger values cannot exceed log(1) = 0")
        self.values[sender - 1, receiver - 1, theta] = log_value

    def copy(self) -> "TriggerLedger":
        dup = TriggerLedger(self.n, self.m)
        dup.values = self.values.copy()
        return dup


def should_broadcast(
    ledger: TriggerLedger,
    sender: int,
    receiver: int,
    theta: int,
    log_mu_value: float,
    t: int,
    threshold: ThresholdFn,
) -> bool:
    """Strict trigger test against the smaller of the pair's two ledger entries."""
    pair_floor = min(
        ledger.last_sent(sender, receiver, theta),
        ledger.last_sent(receiver, sender, theta),
    )
    return log_mu_value < threshold.log_gamma(t) + pair_floor
