"""Transmitter side: timelines -> read/sleep schedules -> emitted light.

A read of S bytes lights the HDD LED for T_on(S); a sleep leaves it dark.
Every read targets a fresh block range so that no read is served from a
cache (which would produce no LED activity).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .calibration import BLOCK_SIZE, LedCalibration, inverse_s_of, t_on_of
from .linecode import ON, SymbolTimeline


@dataclass(frozen=True)
class Read:
    size: int  # bytes
    offset: int  # block index


@dataclass(frozen=True)
class Sleep:
    duration: float  # seconds


def blocks_spanned(size: int) -> int:
    """Offset increment, in blocks, after a read of ``size`` bytes."""
    return max(1, math.ceil(max(size, BLOCK_SIZE) / BLOCK_SIZE))


class OpSchedule:
    """Ordered read/sleep operations, stored column-wise.

    ``sizes`` is 0 for sleeps, ``offsets`` is -1 for sleeps and
    ``sleeps`` is 0.0 for reads.
    """

    def __init__(self, sizes, offsets, sleeps):
        self.sizes = np.asarray(sizes, dtype=np.int64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.sleeps = np.asarray(sleeps, dtype=float)
        if not (self.sizes.shape == self.offsets.shape == self.sleeps.shape):
            raise ValueError("schedule columns differ in length")
        self.validate()

    @classmethod
    def from_ops(cls, ops) -> "OpSchedule":
        sizes, offsets, sleeps = [], [], []
        for op in ops:
            if isinstance(op, Read):
                sizes.append(op.size), offsets.append(op.offset), sleeps.append(0.0)
            elif isinstance(op, Sleep):
                sizes.append(0), offsets.append(-1), sleeps.append(op.duration)
            else:
                raise TypeError(f"not a schedule op: {op!r}")
        return cls(sizes, offsets, sleeps)

    @property
    def is_read(self) -> np.ndarray:
        return self.sizes > 0

    @property
    def ops(self) -> list:
        return [Read(int(s), int(o)) if s > 0 else Sleep(float(d))
                for s, o, d in zip(self.sizes, self.offsets, self.sleeps)]

    def __len__(self) -> int:
        return self.sizes.size

    def validate(self) -> None:
        reads = self.is_read
        if np.any(self.sleeps[~reads] <= 0):
            raise ValueError("sleep durations must be positive")
        if np.any(~reads[1:] & ~reads[:-1]):
            raise ValueError("consecutive sleeps must be merged")
        offs = self.offsets[reads]
        if offs.size and (offs[0] < 0 or np.any(np.diff(offs) <= 0)):
            raise ValueError("read offsets must strictly increase")

    def read_offsets(self) -> np.ndarray:
        return self.offsets[self.is_read]

    def duration(self, calib: LedCalibration) -> float:
        reads = self.is_read
        on = t_on_of(self.sizes[reads], calib) if reads.any() else np.zeros(0)
        return float(np.sum(on) + np.sum(self.sleeps[~reads]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["op", "size_bytes", "offset_block", "duration_seconds"])
            for s, o, d in zip(self.sizes, self.offsets, self.sleeps):
                if s > 0:
                    w.writerow(["read", int(s), int(o), ""])
                else:
                    w.writerow(["sleep", "", "", repr(float(d))])


def schedule_from_timeline(tl: SymbolTimeline, calib: LedCalibration, start_block: int = 0) -> OpSchedule:
    """ON(d) -> Read(size whose on-time is d, next fresh block); OFF(d) -> Sleep(d)."""
    tl = SymbolTimeline(tl.levels, tl.durations)
    if len(tl) == 0:
        return OpSchedule([], [], [])
    # runs of OFF collapse into a single sleep; ON segments stay one read each
    keep = np.r_[True, ~((tl.levels[1:] == 0) & (tl.levels[:-1] == 0))]
    group = np.cumsum(keep) - 1
    levels = tl.levels[keep]
    durations = np.bincount(group, weights=tl.durations)

    reads = levels == ON
    sizes = np.zeros(levels.size, dtype=np.int64)
    uniq, inv = np.unique(durations[reads], return_inverse=True)
    sizes[reads] = np.array([inverse_s_of(d, calib) for d in uniq], dtype=np.int64)[inv]

    offsets = np.full(levels.size, -1, dtype=np.int64)
    incr = np.array([blocks_spanned(int(s)) for s in sizes[reads]], dtype=np.int64)
    offsets[reads] = start_block + np.r_[0, np.cumsum(incr)[:-1]] if incr.size else []
    sleeps = np.where(reads, 0.0, durations)
    return OpSchedule(sizes, offsets, sleeps)


class Waveform:
    """Piecewise-constant light intensity on [0, duration].

    Segment ``i`` covers ``[edges[i], edges[i+1])`` at ``levels[i]`` volts.
    """

    def __init__(self, edges, levels):
        self.edges = np.asarray(edges, dtype=float)
        self.levels = np.asarray(levels, dtype=float)
        if self.edges.size != self.levels.size + 1:
            raise ValueError("need exactly one more edge than levels")
        if self.edges[0] != 0.0:
            raise ValueError("waveforms start at t = 0")
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("segment edges must strictly increase")
        if np.any(self.levels < 0):
            raise ValueError("intensity must be non-negative")

    @classmethod
    def from_durations(cls, durations, levels) -> "Waveform":
        durations = np.asarray(durations, dtype=float)
        return cls(np.r_[0.0, np.cumsum(durations)], levels)

    @classmethod
    def from_timeline(cls, tl: SymbolTimeline, amplitude: float) -> "Waveform":
        """Ideal waveform of a timeline, bypassing the read-size quantisation."""
        return cls.from_durations(tl.durations, tl.levels * float(amplitude)).merged()

    @classmethod
    def empty(cls) -> "Waveform":
        return cls([0.0], [])

    def __len__(self) -> int:
        return self.levels.size

    @property
    def duration(self) -> float:
        return float(self.edges[-1])

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def segments(self) -> list[tuple[float, float, float]]:
        return list(zip(self.edges[:-1].tolist(), self.edges[1:].tolist(), self.levels.tolist()))

    def merged(self) -> "Waveform":
        if len(self) == 0:
            return self
        starts = np.flatnonzero(np.r_[True, self.levels[1:] != self.levels[:-1]])
        return Waveform(np.r_[self.edges[starts], self.edges[-1]], self.levels[starts])

    def value_at(self, t) -> np.ndarray:
        """Intensity at times ``t``, clamped to the waveform's extent."""
        if len(self) == 0:
            return np.zeros(np.shape(t))
        idx = np.searchsorted(self.edges, t, side="right") - 1
        return self.levels[np.clip(idx, 0, len(self) - 1)]

    def integral(self, t) -> np.ndarray:
        """Cumulative integral of intensity from 0 to ``t`` (t clipped to [0, duration])."""
        if len(self) == 0:
            return np.zeros(np.shape(t))
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        cum = np.r_[0.0, np.cumsum(self.levels * self.durations)]
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self) - 1)
        return cum[idx] + self.levels[idx] * (t - self.edges[idx])

    def map_levels(self, fn) -> "Waveform":
        return Waveform(self.edges, fn(self.levels)).merged()

    def combine(self, other: "Waveform", fn=np.maximum) -> "Waveform":
        """Pointwise ``fn`` of two waveforms over the longer one's extent."""
        edges = np.union1d(self.edges, other.edges)
        mids = 0.5 * (edges[:-1] + edges[1:])
        a = np.where(mids < self.duration, self.value_at(mids), 0.0)
        b = np.where(mids < other.duration, other.value_at(mids), 0.0)
        return Waveform(edges, fn(a, b)).merged()

    def on_segments(self, threshold: float = 0.0) -> np.ndarray:
        """Durations of segments brighter than ``threshold``."""
        return self.durations[self.levels > threshold]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_start_seconds", "t_end_seconds", "intensity_volts"])
            for a, b, v in self.segments:
                w.writerow([repr(a), repr(b), repr(v)])


def waveform_from_schedule(sch: OpSchedule, calib: LedCalibration) -> Waveform:
    reads = sch.is_read
    durations = sch.sleeps.copy()
    if reads.any():
        uniq, inv = np.unique(sch.sizes[reads], return_inverse=True)
        durations[reads] = np.atleast_1d(t_on_of(uniq, calib))[inv]
    levels = np.where(reads, calib.amplitude, 0.0)
    return Waveform.from_durations(durations, levels).merged()


def transmit(tl: SymbolTimeline, calib: LedCalibration) -> tuple[OpSchedule, Waveform]:
    """Schedule a timeline and synthesise the light it produces."""
    sch = schedule_from_timeline(tl, calib)
    return sch, waveform_from_schedule(sch, calib)
