"""Adaptive range quantizer, belief codec, and bin-index wire format.

Each (agent, hypothesis) pair carries a shrinking range endpoint q, starting
at 1. When the agent's belief drops strictly below q, the belief is snapped
up to the endpoint of its bin after splitting [0, q] into 2**bits equal bins,
and only the bin index crosses the wire. Sender and receiver both reconstruct
the new endpoint from (previous endpoint, bin index), so their views agree
bit for bit. Everything runs in log domain; the bin index is exact either way.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from .errors import ProtocolViolation

# Wire header: sender id (uint16), hypothesis index (uint16), bit width (uint8).
_HEADER = struct.Struct(">HHB")
MAX_BITS = 52  # keeps ratio * 2**bits exactly representable in binary64


def quantize(x: float, lower: float, upper: float, bits: int) -> float:
    """Upper endpoint of x's bin after splitting [lower, upper] into 2**bits bins.

    x == lower maps to lower itself (index 0); every other x maps to the
    endpoint at or above it, so the result never understates x.
    """
    if not lower < upper:
        raise ValueError(f"empty range [{lower}, {upper}]")
    _check_bits(bits)
    if not (lower <= x <= upper):
        raise ValueError(f"{x} outside quantizer range [{lower}, {upper}]")
    width = (upper - lower) / (1 << bits)
    return lower + width * math.ceil((x - lower) / width)


def _check_bits(bits: int) -> None:
    if not (1 <= int(bits) <= MAX_BITS) or int(bits) != bits:
        raise ValueError(f"bit width must be an integer in 1..{MAX_BITS}, got {bits!r}")


def _bin_upper_log(log_q_prev: float, index: int, bits: int) -> float:
    # Shared by encoder and decoder: one expression, identical operands,
    # identical rounding, hence bitwise-equal views on both ends.
    return log_q_prev + math.log(index / (1 << bits))


def encode_belief(log_q_prev: float, log_mu: float, bits: int) -> tuple[float, int]:
    """Snap a belief (strictly below the current endpoint) up to its bin endpoint.

    Returns (new log endpoint, 1-based bin index). The index is clamped to at
    least 1 so the endpoint keeps full support no matter how far the belief
    fell since the last broadcast.
    """
    _check_bits(bits)
    if not log_mu < log_q_prev:
        raise ValueError("encode requires the belief strictly below the current endpoint")
    ratio = math.exp(log_mu - log_q_prev)
    index = max(1, math.ceil(ratio * (1 << bits)))
    return _bin_upper_log(log_q_prev, index, bits), index


def decode_belief(log_q_prev: float, index: int, bits: int) -> float:
    """Receiver-side reconstruction of the new endpoint from the bin index."""
    _check_bits(bits)
    if not (1 <= index <= (1 << bits)):
        raise ProtocolViolation(f"bin index {index} outside 1..2**{bits}")
    return _bin_upper_log(log_q_prev, index, bits)


@dataclass(frozen=True)
class QuantMessage:
    sender: int
    theta: int
    index: int
    bits: int

    def __post_init__(self):
        _check_bits(self.bits)
        if not (1 <= self.index <= (1 << self.bits)):
            raise ProtocolViolation(f"bin index {self.index} outside 1..2**{self.bits}")
        if not (0 <= self.sender <= 0xFFFF and 0 <= self.theta <= 0xFFFF):
            raise ProtocolViolation("sender/theta do not fit the wire header")


def serialize_index(index: int, bits: int) -> bytes:
    """index - 1 in exactly `bits` bits, big-endian, zero-padded to whole bytes."""
    _check_bits(bits)
    if not (1 <= index <= (1 << bits)):
        raise ProtocolViolation(f"bin index {index} outside 1..2**{bits}")
    nbytes = (bits + 7) // 8
    return ((index - 1) << (nbytes * 8 - bits)).to_bytes(nbytes, "big")


def parse_index(payload: bytes, bits: int) -> int:
    _check_bits(bits)
    nbytes = (bits + 7) // 8
    if len(payload) != nbytes:
        raise ProtocolViolation(f"expected {nbytes} payload bytes, got {len(payload)}")
    raw = int.from_bytes(payload, "big")
    pad = nbytes * 8 - bits
    if raw & ((1 << pad) - 1):
        raise ProtocolViolation("nonzero padding bits in bin-index payload")
    return (raw >> pad) + 1


def serialize_message(message: QuantMessage) -> bytes:
    header = _HEADER.pack(message.sender, message.theta, message.bits)
    return header + serialize_index(message.index, message.bits)


def parse_message(data: bytes) -> QuantMessage:
    if len(data) < _HEADER.size:
        raise ProtocolViolation(f"message truncated at {len(data)} bytes")
    sender, theta, bits = _HEADER.unpack_from(data)
    if not (1 <= bits <= MAX_BITS):
        raise ProtocolViolation(f"bit width {bits} outside 1..{MAX_BITS}")
    index = parse_index(data[_HEADER.size :], bits)
    return QuantMessage(sender=sender, theta=theta, index=index, bits=bits)
