"""Bit framing: preamble, optional size field, payload and CRC-16.

Two layouts are supported::

    fixed     | 10101010 | payload (256) | crc16 |
    variable  | 10101010 | n (16, BE)    | payload (n) | crc16 |

The CRC is CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection,
no final XOR) over the payload bits only, transmitted MSB first.
"""
from __future__ import annotations

import binascii
import enum
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import CrcMismatch, PayloadSizeError, PreambleMismatch, TruncatedFrame

BitStream = npt.NDArray[np.uint8]

PREAMBLE = np.array([1, 0, 1, 0, 1, 0, 1, 0], dtype=np.uint8)
PREAMBLE_BITS = 8
SIZE_FIELD_BITS = 16
CRC_BITS = 16
FIXED_PAYLOAD_BITS = 256
MAX_VARIABLE_PAYLOAD_BITS = 0xFFFF

CRC16_POLY = 0x1021
CRC16_INIT = 0xFFFF


# --------------------------------------------------------------------------
# bit helpers
# --------------------------------------------------------------------------

def as_bits(bits) -> BitStream:
    """Coerce a sequence of 0/1 values (or a '0101' string) to a uint8 array."""
    if isinstance(bits, str):
        bits = [int(c) for c in bits if not c.isspace()]
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise ValueError("bit values must be 0 or 1")
    return arr


def bits_from_bytes(data: bytes) -> BitStream:
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    """Pack bits MSB-first; the length must be a whole number of bytes."""
    arr = as_bits(bits)
    if arr.size % 8:
        raise ValueError(f"{arr.size} bits is not a whole number of bytes")
    return np.packbits(arr).tobytes()


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in as_bits(bits))


def int_to_bits(value: int, width: int) -> BitStream:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits) -> int:
    value = 0
    for b in as_bits(bits):
        value = (value << 1) | int(b)
    return value


# --------------------------------------------------------------------------
# CRC
# --------------------------------------------------------------------------

def crc16(payload) -> int:
    """CRC-16/CCITT-FALSE of an arbitrary-length bit sequence.

    Whole bytes go through ``binascii.crc_hqx`` (same polynomial, MSB-first);
    any trailing partial byte is clocked in bit by bit.
    """
    bits = as_bits(payload)
    whole = bits.size - bits.size % 8
    crc = binascii.crc_hqx(np.packbits(bits[:whole]).tobytes(), CRC16_INIT) if whole else CRC16_INIT
    for b in bits[whole:]:
        feedback = ((crc >> 15) & 1) ^ int(b)
        crc = (crc << 1) & 0xFFFF
        if feedback:
            crc ^= CRC16_POLY
    return crc


# --------------------------------------------------------------------------
# schemes
# --------------------------------------------------------------------------

class FrameKind(enum.Enum):
    FIXED = "fixed"
    VARIABLE = "variable"


@dataclass(frozen=True)
class FramingScheme:
    kind: FrameKind = FrameKind.FIXED
    fixed_payload_bits: int = FIXED_PAYLOAD_BITS

    def __post_init__(self):
        object.__setattr__(self, "kind", FrameKind(self.kind))

    @property
    def header_bits(self) -> int:
        return PREAMBLE_BITS + (SIZE_FIELD_BITS if self.kind is FrameKind.VARIABLE else 0)

    def frame_bits(self, n_payload: int | None = None) -> int:
        if self.kind is FrameKind.FIXED:
            return PREAMBLE_BITS + self.fixed_payload_bits + CRC_BITS
        if n_payload is None:
            raise ValueError("variable framing needs the payload length")
        return PREAMBLE_BITS + SIZE_FIELD_BITS + n_payload + CRC_BITS

    @property
    def max_frame_bits(self) -> int:
        if self.kind is FrameKind.FIXED:
            return self.frame_bits()
        return self.frame_bits(MAX_VARIABLE_PAYLOAD_BITS)


FIXED = FramingScheme(FrameKind.FIXED)
VARIABLE = FramingScheme(FrameKind.VARIABLE)


# --------------------------------------------------------------------------
# encode / parse
# --------------------------------------------------------------------------

def encode_frame(payload, scheme: FramingScheme = FIXED) -> BitStream:
    bits = as_bits(payload)
    n = bits.size
    if scheme.kind is FrameKind.FIXED:
        if n != scheme.fixed_payload_bits:
            raise PayloadSizeError(
                f"fixed framing needs exactly {scheme.fixed_payload_bits} payload bits, got {n}")
        parts = [PREAMBLE, bits]
    else:
        if not 1 <= n <= MAX_VARIABLE_PAYLOAD_BITS:
            raise PayloadSizeError(f"variable framing needs 1..65535 payload bits, got {n}")
        parts = [PREAMBLE, int_to_bits(n, SIZE_FIELD_BITS), bits]
    parts.append(int_to_bits(crc16(bits), CRC_BITS))
    return np.concatenate(parts)


def parse_frame(bits, scheme: FramingScheme = FIXED) -> tuple[BitStream, int]:
    """Validate the frame at the start of ``bits``.

    Returns ``(payload, consumed)`` where ``consumed`` is the frame length in
    bits, so that callers can walk a concatenation of frames.
    """
    bits = as_bits(bits)
    if bits.size < PREAMBLE_BITS:
        raise TruncatedFrame(f"{bits.size} bits is shorter than the preamble")
    if not np.array_equal(bits[:PREAMBLE_BITS], PREAMBLE):
        raise PreambleMismatch(f"preamble {bits_to_str(bits[:PREAMBLE_BITS])} != 10101010")

    if scheme.kind is FrameKind.FIXED:
        n = scheme.fixed_payload_bits
        start = PREAMBLE_BITS
    else:
        if bits.size < PREAMBLE_BITS + SIZE_FIELD_BITS:
            raise TruncatedFrame("size field is incomplete")
        n = bits_to_int(bits[PREAMBLE_BITS:PREAMBLE_BITS + SIZE_FIELD_BITS])
        if n == 0:
            raise TruncatedFrame("declared payload size is zero")
        start = PREAMBLE_BITS + SIZE_FIELD_BITS

    total = start + n + CRC_BITS
    if bits.size < total:
        raise TruncatedFrame(f"frame needs {total} bits, only {bits.size} available")

    payload = bits[start:start + n].copy()
    received = bits_to_int(bits[start + n:total])
    computed = crc16(payload)
    if computed != received:
        raise CrcMismatch(computed, received)
    return payload, total


def split_payload(bits, scheme: FramingScheme = FIXED, chunk_bits: int = 1024) -> list[BitStream]:
    """Cut a long bit stream into per-frame payloads.

    Fixed framing zero-pads the last chunk up to 256 bits. Variable framing
    uses ``chunk_bits`` per frame with a shorter final frame.
    """
    bits = as_bits(bits)
    if bits.size == 0:
        raise PayloadSizeError("nothing to send")
    if scheme.kind is FrameKind.FIXED:
        size = scheme.fixed_payload_bits
        pad = (-bits.size) % size
        if pad:
            bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    else:
        if not 1 <= chunk_bits <= MAX_VARIABLE_PAYLOAD_BITS:
            raise PayloadSizeError(f"chunk_bits {chunk_bits} outside 1..65535")
        size = chunk_bits
    return [bits[i:i + size] for i in range(0, bits.size, size)]
