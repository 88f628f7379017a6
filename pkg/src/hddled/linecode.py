"""Line codes that turn frame bits into LED ON/OFF timelines and back.

OOK         1 -> ON(t)            0 -> OFF(t)
Manchester  1 -> ON(t) OFF(t)     0 -> OFF(t) ON(t)
B-FSK       1 -> ON(T(s1)) OFF(g) 0 -> ON(T(s0)) OFF(g)

where T(s) is the calibrated LED-ON time of an ``s``-byte read and ``g``
is the guard interval. Slots are kept as separate segments even when
neighbours share a level; merging happens at waveform synthesis.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .calibration import LedCalibration, t_on_of
from .errors import InvalidSymbol
from .framing import BitStream, as_bits

OFF = 0
ON = 1

IDLE_GAP_BITS = 4


class Modulation(enum.Enum):
    OOK = "ook"
    MANCHESTER = "manchester"
    BFSK = "bfsk"


@dataclass(frozen=True, eq=False)
class SymbolTimeline:
    """Sequence of (level, duration) segments."""

    levels: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.uint8).ravel()
        durations = np.asarray(self.durations, dtype=float).ravel()
        if levels.shape != durations.shape:
            raise ValueError("levels and durations differ in length")
        if levels.size and levels.max() > 1:
            raise ValueError("levels must be ON (1) or OFF (0)")
        if np.any(~(durations > 0)):
            raise ValueError("segment durations must be strictly positive")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "durations", durations)

    @classmethod
    def empty(cls) -> "SymbolTimeline":
        return cls(np.zeros(0, np.uint8), np.zeros(0))

    @classmethod
    def idle(cls, duration: float) -> "SymbolTimeline":
        return cls([OFF], [duration])

    @classmethod
    def concat(cls, parts) -> "SymbolTimeline":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(np.concatenate([p.levels for p in parts]),
                   np.concatenate([p.durations for p in parts]))

    def __len__(self) -> int:
        return self.levels.size

    def __iter__(self):
        return zip(self.levels.tolist(), self.durations.tolist())

    @property
    def duration(self) -> float:
        return float(self.durations.sum())

    @property
    def on_time(self) -> float:
        return float(self.durations[self.levels == ON].sum())

    @property
    def off_time(self) -> float:
        return float(self.durations[self.levels == OFF].sum())

    def scaled(self, factor: float) -> "SymbolTimeline":
        return SymbolTimeline(self.levels, self.durations * factor)

    def merged(self) -> "SymbolTimeline":
        """Collapse runs of equal level into single segments."""
        if len(self) == 0:
            return self
        starts = np.flatnonzero(np.r_[True, self.levels[1:] != self.levels[:-1]])
        return SymbolTimeline(self.levels[starts], np.add.reduceat(self.durations, starts))


@dataclass(frozen=True)
class ModulationScheme:
    kind: Modulation = Modulation.OOK
    t_on: float = 0.18e-3
    t_off: float = 0.18e-3
    bfsk_s1: int = 256_000
    bfsk_s0: int = 512_000
    bfsk_guard: float = 1.2e-3

    def __post_init__(self):
        object.__setattr__(self, "kind", Modulation(self.kind))
        if self.kind is Modulation.BFSK:
            if self.bfsk_s1 == self.bfsk_s0:
                raise ValueError("B-FSK read sizes for 1 and 0 must differ")
            if self.bfsk_s1 <= 0 or self.bfsk_s0 <= 0 or not self.bfsk_guard > 0:
                raise ValueError("B-FSK read sizes and guard must be positive")
        else:
            if not (self.t_on > 0 and self.t_off > 0):
                raise ValueError("slot durations must be positive")
            if self.t_on != self.t_off:
                raise ValueError("OOK/Manchester use equal ON and OFF slot durations")

    @classmethod
    def ook(cls, slot: float) -> "ModulationScheme":
        return cls(Modulation.OOK, slot, slot)

    @classmethod
    def manchester(cls, slot: float) -> "ModulationScheme":
        return cls(Modulation.MANCHESTER, slot, slot)

    @classmethod
    def bfsk(cls, s1: int = 256_000, s0: int = 512_000, guard: float = 1.2e-3) -> "ModulationScheme":
        return cls(Modulation.BFSK, guard, guard, int(s1), int(s0), float(guard))

    @property
    def slot(self) -> float:
        return self.t_on

    @property
    def slots_per_bit(self) -> int:
        return 2 if self.kind is Modulation.MANCHESTER else 1

    def pulse_widths(self, calib: LedCalibration) -> tuple[float, float]:
        """Calibrated ON times for logical (1, 0) under B-FSK."""
        return t_on_of(self.bfsk_s1, calib), t_on_of(self.bfsk_s0, calib)

    def bit_period(self, calib: LedCalibration | None = None) -> float:
        """Nominal duration of one logical bit (B-FSK: mean of both symbols)."""
        if self.kind is Modulation.BFSK:
            t1, t0 = self.pulse_widths(_need(calib))
            return 0.5 * (t1 + t0) + self.bfsk_guard
        return self.slots_per_bit * self.slot

    def max_bit_period(self, calib: LedCalibration | None = None) -> float:
        if self.kind is Modulation.BFSK:
            return max(self.pulse_widths(_need(calib))) + self.bfsk_guard
        return self.bit_period()

    def shortest_feature(self, calib: LedCalibration | None = None) -> float:
        """Shortest constant-level stretch the scheme can emit."""
        if self.kind is Modulation.BFSK:
            return min(*self.pulse_widths(_need(calib)), self.bfsk_guard)
        return self.slot

    def check_separable(self, calib: LedCalibration, jitter_sigma: float = 0.0) -> None:
        """B-FSK pulse widths must differ by at least twice the edge jitter."""
        if self.kind is not Modulation.BFSK:
            return
        t1, t0 = self.pulse_widths(calib)
        if abs(t1 - t0) < 2 * jitter_sigma or t1 == t0:
            raise ValueError(
                f"B-FSK pulses {t1 * 1e3:.3f} ms / {t0 * 1e3:.3f} ms are not separable "
                f"at jitter sigma {jitter_sigma * 1e3:.3f} ms")


def _need(calib):
    if calib is None:
        raise ValueError("B-FSK needs an LED calibration")
    return calib


def modulate(bits, scheme: ModulationScheme, calib: LedCalibration | None = None) -> SymbolTimeline:
    bits = as_bits(bits)
    if bits.size == 0:
        raise ValueError("cannot modulate an empty bit stream")

    if scheme.kind is Modulation.OOK:
        return SymbolTimeline(bits, np.full(bits.size, scheme.slot))

    if scheme.kind is Modulation.MANCHESTER:
        levels = np.empty(2 * bits.size, dtype=np.uint8)
        levels[0::2] = bits
        levels[1::2] = 1 - bits
        return SymbolTimeline(levels, np.full(levels.size, scheme.slot))

    calib = _need(calib)
    scheme.check_separable(calib)
    t1, t0 = scheme.pulse_widths(calib)
    levels = np.tile(np.array([ON, OFF], dtype=np.uint8), bits.size)
    durations = np.empty(2 * bits.size)
    durations[0::2] = np.where(bits == 1, t1, t0)
    durations[1::2] = scheme.bfsk_guard
    return SymbolTimeline(levels, durations)


def idle_gap(scheme: ModulationScheme, calib: LedCalibration | None = None) -> SymbolTimeline:
    """OFF stretch placed before, between and after frames."""
    return SymbolTimeline.idle(IDLE_GAP_BITS * scheme.max_bit_period(calib))


def modulate_frames(frames, scheme: ModulationScheme, calib: LedCalibration | None = None) -> SymbolTimeline:
    """Gap, frame, gap, frame, ..., gap."""
    gap = idle_gap(scheme, calib)
    parts = [gap]
    for frame in frames:
        parts += [modulate(frame, scheme, calib), gap]
    return SymbolTimeline.concat(parts)


def symbols_of(timeline: SymbolTimeline, scheme: ModulationScheme):
    """Per-slot levels (OOK/Manchester) or ON-pulse widths (B-FSK) of a
    timeline produced by :func:`modulate`."""
    if scheme.kind is Modulation.BFSK:
        return timeline.durations[timeline.levels == ON]
    return timeline.levels.copy()


def symbols_to_bits(symbols, scheme: ModulationScheme, calib: LedCalibration | None = None) -> BitStream:
    """Inverse of the bit -> slot mapping.

    For OOK/Manchester ``symbols`` are per-slot ON/OFF decisions aligned to
    bit boundaries. For B-FSK they are measured ON-pulse widths in seconds,
    classified against the midpoint of the two calibrated widths.
    """
    if scheme.kind is Modulation.BFSK:
        widths = np.asarray(symbols, dtype=float).ravel()
        t1, t0 = scheme.pulse_widths(_need(calib))
        mid = 0.5 * (t1 + t0)
        is_one = widths < mid if t1 < t0 else widths > mid
        return is_one.astype(np.uint8)

    slots = as_bits(symbols)
    if scheme.kind is Modulation.OOK:
        return slots
    if slots.size % 2:
        raise InvalidSymbol("Manchester needs an even number of slots")
    first, second = slots[0::2], slots[1::2]
    bad = np.flatnonzero(first == second)
    if bad.size:
        i = int(bad[0])
        raise InvalidSymbol(f"Manchester pair {first[i]}{second[i]} at bit {i}")
    return first.copy()
