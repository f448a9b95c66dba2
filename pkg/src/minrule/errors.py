"""Exception taxonomy shared across the package.

Error kinds map onto the CLI exit codes: scenario/model problems are
validation failures (exit 1), mid-run numeric or protocol breaches are
runtime failures (exit 2), and filesystem trouble is I/O (exit 3).
"""

from __future__ import annotations


class SimulatorError(Exception):
    """Base class for everything raised deliberately by this package."""


class ModelViolation(SimulatorError):
    """A statistical model breaks its contract (support, normalization)."""


class ConfigError(SimulatorError):
    """A scenario or schedule is structurally invalid."""


class ProtocolViolation(SimulatorError):
    """A message or ledger value is inconsistent with the communication rules."""


class InvariantBreach(SimulatorError):
    """A runtime numeric invariant failed mid-run."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
