"""Read size -> LED-ON time calibration for the HDD activity LED.

The measured table spans 4 KB .. 60 MB and 0.18 ms .. 630 ms, so values
between measured points are interpolated linearly in log-log space.
Reads at or below one block (4 KB) produce the shortest pulse the LED
can show, which depends on the machine (color profile).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CalibrationRangeError

BLOCK_SIZE = 4096

# (read size in bytes, LED-ON time in seconds) measured on the red-LED machine
MEASURED_POINTS: tuple[tuple[int, float], ...] = (
    (4096, 0.18e-3),
    (256_000, 1.2e-3),
    (512_000, 2e-3),
    (600_000, 3.2e-3),
    (800_000, 3.6e-3),
    (1_280_000, 5e-3),
    (5_120_000, 32e-3),
    (8_000_000, 60e-3),
    (15_120_000, 250e-3),
    (60_000_000, 630e-3),
)

# bit rates measured alongside each point; kept as data, they do not follow from the on-times
MEASURED_BIT_RATES: dict[int, float] = {
    4096: 4000.0, 256_000: 833.0, 512_000: 500.0, 600_000: 312.0, 800_000: 277.0,
    1_280_000: 180.0, 5_120_000: 30.0, 8_000_000: 16.0, 15_120_000: 4.0, 60_000_000: 1.6,
}


@dataclass(frozen=True)
class ColorProfile:
    name: str
    amplitude: float  # volts at the reference distance
    min_pulse: float  # seconds, on-time of a single-block read


COLOR_PROFILES: dict[str, ColorProfile] = {
    "red": ColorProfile("red", 5.3, 0.18e-3),
    "blue": ColorProfile("blue", 0.71, 0.12e-3),
    "white": ColorProfile("white", 0.18, 0.10e-3),
}


def color_profile(name: str) -> ColorProfile:
    try:
        return COLOR_PROFILES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown LED color {name!r}; choose from {sorted(COLOR_PROFILES)}") from None


@dataclass(frozen=True, eq=False)
class LedCalibration:
    """Monotone (read size, on-time) table plus the LED's optical profile.

    ``sizes[0]`` is always ``BLOCK_SIZE`` with on-time ``min_pulse``.
    """

    sizes: np.ndarray
    on_times: np.ndarray
    color: str = "red"
    amplitude: float = 5.3
    min_pulse: float = 0.18e-3
    _log_s: np.ndarray = field(init=False, repr=False, compare=False)
    _log_t: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        times = np.asarray(self.on_times, dtype=float)
        if sizes.ndim != 1 or sizes.shape != times.shape or sizes.size < 2:
            raise ValueError("calibration needs at least two (size, on-time) points")
        if np.any(np.diff(sizes) <= 0) or np.any(np.diff(times) <= 0):
            raise ValueError("calibration points must be strictly increasing in size and on-time")
        if sizes[0] != BLOCK_SIZE or times[0] != self.min_pulse:
            raise ValueError("first calibration point must be (BLOCK_SIZE, min_pulse)")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        sizes.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "on_times", times)
        object.__setattr__(self, "_log_s", np.log(sizes.astype(float)))
        object.__setattr__(self, "_log_t", np.log(times))

    @classmethod
    def from_points(cls, points, profile: ColorProfile | str = "red") -> "LedCalibration":
        """Build a calibration, forcing the one-block floor to the profile's pulse width."""
        if isinstance(profile, str):
            profile = color_profile(profile)
        pts = sorted((int(s), float(t)) for s, t in points if int(s) > BLOCK_SIZE)
        pts.insert(0, (BLOCK_SIZE, profile.min_pulse))
        sizes, times = zip(*pts)
        return cls(np.array(sizes), np.array(times), profile.name, profile.amplitude, profile.min_pulse)

    @classmethod
    def for_color(cls, name: str = "red") -> "LedCalibration":
        return cls.from_points(MEASURED_POINTS, name)

    @classmethod
    def from_csv(cls, path, profile: ColorProfile | str = "red") -> "LedCalibration":
        """Load ``read_size_bytes,on_time_seconds`` rows."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"read_size_bytes", "on_time_seconds"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: expected header read_size_bytes,on_time_seconds")
            points = [(int(float(r["read_size_bytes"])), float(r["on_time_seconds"])) for r in reader]
        return cls.from_points(points, profile)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["read_size_bytes", "on_time_seconds"])
            for s, t in zip(self.sizes, self.on_times):
                w.writerow([int(s), repr(float(t))])

    @property
    def max_size(self) -> int:
        return int(self.sizes[-1])

    @property
    def max_on_time(self) -> float:
        return float(self.on_times[-1])

    def with_profile(self, profile: ColorProfile | str) -> "LedCalibration":
        return LedCalibration.from_points(zip(self.sizes, self.on_times), profile)


def t_on_of(size, calib: LedCalibration):
    """LED-ON time produced by reading ``size`` bytes.

    Exact at table points, log-log linear between them, ``min_pulse`` at or
    below one block. Accepts scalars or arrays.
    """
    s = np.asarray(size, dtype=float)
    if np.any(s <= 0) or np.any(~np.isfinite(s)):
        raise CalibrationRangeError("read size must be a positive number of bytes")
    if np.any(s > calib.max_size):
        raise CalibrationRangeError(f"read size above calibrated maximum {calib.max_size} bytes")
    clipped = np.maximum(s, BLOCK_SIZE)
    t = np.exp(np.interp(np.log(clipped), calib._log_s, calib._log_t))
    idx = np.searchsorted(calib.sizes, clipped)
    idx = np.minimum(idx, calib.sizes.size - 1)
    hit = calib.sizes[idx] == clipped
    t = np.where(hit, calib.on_times[idx], t)
    return float(t) if t.ndim == 0 else t


def inverse_s_of(t: float, calib: LedCalibration) -> int:
    """Read size (bytes) whose calibrated on-time is closest to ``t``."""
    t = float(t)
    lo, hi = calib.min_pulse, calib.max_on_time
    if not math.isfinite(t) or t < lo * (1 - 1e-9) or t > hi * (1 + 1e-9):
        raise CalibrationRangeError(f"on-time {t:.6g} s outside achievable range [{lo:.6g}, {hi:.6g}] s")
    hit = np.flatnonzero(np.isclose(calib.on_times, t, rtol=1e-12, atol=0.0))
    if hit.size:
        return int(calib.sizes[hit[0]])
    est = math.exp(float(np.interp(math.log(t), calib._log_t, calib._log_s)))
    candidates = sorted({max(BLOCK_SIZE, math.floor(est)), min(calib.max_size, math.ceil(est))})
    return min(candidates, key=lambda s: (abs(t_on_of(s, calib) - t), s))


def write_reference_csv(path) -> Path:
    """Write the reference table (red LED) to ``path``."""
    LedCalibration.for_color("red").to_csv(path)
    return Path(path)
