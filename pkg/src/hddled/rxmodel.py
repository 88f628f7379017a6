"""Optical channel and receiver simulation.

The channel perturbs the emitted waveform (edge jitter, a software jammer
driving the same LED, inverse-square attenuation, ambient light). The two
receiver families turn the result into uniformly sampled traces: a
photodiode/ADC takes point samples, a camera averages each frame's exposure
window.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .txmodel import Waveform

# jitter, jammer, receiver noise, receiver phase
_STREAM_JITTER, _STREAM_JAMMER, _STREAM_NOISE, _STREAM_PHASE = range(4)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, stream])


@dataclass(frozen=True)
class Jammer:
    """Background process issuing random disk I/O on the same LED."""

    duty: float = 0.5
    mean_pulse: float = 1e-3  # seconds
    amplitude: float = 5.3  # volts at the reference distance

    def __post_init__(self):
        if not 0.0 <= self.duty <= 1.0:
            raise ValueError("jammer duty must lie in [0, 1]")
        if not self.mean_pulse > 0 or self.amplitude < 0:
            raise ValueError("jammer pulse length must be positive and amplitude non-negative")


@dataclass(frozen=True)
class ChannelConfig:
    distance: float = 1.0  # meters
    attenuation_ref: float = 1.0  # meters; gain is 1 inside this radius
    ambient: float = 0.0  # volts
    edge_jitter_sigma: float = 0.0  # seconds
    jammer: Jammer | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.distance < 0 or not self.attenuation_ref > 0:
            raise ValueError("distance must be >= 0 and attenuation_ref > 0")
        if self.ambient < 0 or self.edge_jitter_sigma < 0:
            raise ValueError("ambient and edge jitter must be non-negative")

    @property
    def gain(self) -> float:
        return (self.attenuation_ref / max(self.distance, self.attenuation_ref)) ** 2


def jitter_edges(w: Waveform, sigma: float, rng: np.random.Generator) -> Waveform:
    """Shift every interior boundary by N(0, sigma), keeping order and extent."""
    if sigma <= 0 or len(w) < 2:
        return w
    inner = w.edges[1:-1] + rng.normal(0.0, sigma, len(w) - 1)
    n = inner.size
    eps = min(1e-9, w.duration / (10 * (n + 1)))
    k = np.arange(1, n + 1)
    inner = np.maximum.accumulate(np.maximum(inner, eps * k) - eps * k) + eps * k
    rk = np.arange(n, 0, -1)
    upper = w.duration - eps * rk
    inner = (np.minimum.accumulate(np.minimum(inner, upper)[::-1] + eps * rk[::-1]) - eps * rk[::-1])[::-1]
    return Waveform(np.r_[0.0, inner, w.duration], w.levels)


# candidate pulse rate is fixed at the rate needed for this duty, so lower
# duties keep a subset of the same pulses (monotone coupling across duties)
_JAMMER_BASE_DUTY = 0.99


def _pulse_rate(duty: float, mean_pulse: float) -> float:
    """Poisson start rate whose overlapping exponential pulses cover ``duty`` of the time."""
    return -math.log1p(-duty) / mean_pulse


def jammer_waveform(duration: float, jammer: Jammer, rng: np.random.Generator) -> Waveform:
    """Random read bursts on [0, duration].

    Bursts start as a Poisson process (exponential inter-arrival times) and
    last Exp(mean_pulse); overlapping bursts merge. A union of such pulses
    is lit a fraction 1 - exp(-rate * mean_pulse) of the time, which fixes
    the rate for a given duty. Candidates are drawn at a fixed base rate
    and thinned, so for one seed a higher duty only adds pulses.
    """
    if duration <= 0:
        return Waveform.empty()
    if jammer.duty <= 0:
        return Waveform([0.0, duration], [0.0])
    if jammer.duty >= 1:
        return Waveform([0.0, duration], [jammer.amplitude])
    mp = jammer.mean_pulse
    rate = _pulse_rate(jammer.duty, mp)
    base = max(rate, _pulse_rate(_JAMMER_BASE_DUTY, mp))
    # start early so the process is stationary at t = 0
    lead = 20 * mp
    n = rng.poisson(base * (duration + lead))
    starts = np.sort(rng.uniform(-lead, duration, n))
    lengths = rng.exponential(mp, n)
    keep = rng.uniform(0.0, 1.0, n) < rate / base
    starts, ends = starts[keep], starts[keep] + lengths[keep]
    if starts.size == 0:
        return Waveform([0.0, duration], [0.0])
    reach = np.maximum.accumulate(ends)
    new = np.r_[True, starts[1:] > reach[:-1]]
    on = np.clip(starts[new], 0.0, duration)
    off = np.clip(np.r_[reach[np.flatnonzero(new)[1:] - 1], reach[-1]], 0.0, duration)
    ok = off > on
    on, off = on[ok], off[ok]
    edges = np.r_[0.0, np.column_stack([on, off]).ravel(), duration]
    levels = np.tile([0.0, jammer.amplitude], on.size + 1)[: edges.size - 1]
    width_ok = np.diff(edges) > 0
    return Waveform(np.r_[edges[:-1][width_ok], duration], levels[width_ok]).merged()


def apply_channel(w: Waveform, cfg: ChannelConfig) -> Waveform:
    out = jitter_edges(w, cfg.edge_jitter_sigma, _rng(cfg.rng_seed, _STREAM_JITTER))
    if cfg.jammer is not None and cfg.jammer.duty > 0 and w.duration > 0:
        jam = jammer_waveform(w.duration, cfg.jammer, _rng(cfg.rng_seed, _STREAM_JAMMER))
        # one physical LED: it is either lit or not
        out = out.combine(jam, np.maximum)
    gain = cfg.gain
    if gain != 1.0 or cfg.ambient:
        out = out.map_levels(lambda lv: lv * gain + cfg.ambient)
    return out


class ReceiverKind(enum.Enum):
    CAMERA = "camera"
    PHOTODIODE = "photodiode"


@dataclass(frozen=True)
class ReceiverModel:
    kind: ReceiverKind = ReceiverKind.PHOTODIODE
    fps: float = 30.0
    exposure_fraction: float = 0.9
    sample_rate: float = 200e3
    noise_sigma: float = 0.0
    # sampling clock offset as a fraction of one sample period; None draws it from the seed
    phase: float | None = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ReceiverKind(self.kind))
        if self.kind is ReceiverKind.CAMERA:
            if not self.fps > 0:
                raise ValueError("camera fps must be positive")
            if not 0 < self.exposure_fraction <= 1:
                raise ValueError("exposure fraction must lie in (0, 1]")
        elif not self.sample_rate > 0:
            raise ValueError("photodiode sample rate must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")
        if self.phase is not None and not 0 <= self.phase < 1:
            raise ValueError("phase must lie in [0, 1)")

    @classmethod
    def photodiode(cls, sample_rate: float = 200e3, noise_sigma: float = 0.0, phase: float | None = 0.0):
        return cls(ReceiverKind.PHOTODIODE, sample_rate=sample_rate, noise_sigma=noise_sigma, phase=phase)

    @classmethod
    def camera(cls, fps: float = 30.0, exposure_fraction: float = 0.9, noise_sigma: float = 0.0,
               phase: float | None = 0.0):
        return cls(ReceiverKind.CAMERA, fps=fps, exposure_fraction=exposure_fraction,
                   noise_sigma=noise_sigma, phase=phase)

    @property
    def rate(self) -> float:
        return self.fps if self.kind is ReceiverKind.CAMERA else self.sample_rate


@dataclass(eq=False)
class SampledTrace:
    """Uniformly sampled intensity.

    Sample ``k`` is taken at ``t0 + k / rate``; ``aperture`` is the length
    of the integration window starting there (0 for point samples).
    """

    rate: float
    samples: np.ndarray
    t0: float = 0.0
    aperture: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if not self.rate > 0:
            raise ValueError("sample rate must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.rate

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_seconds", "intensity_volts"])
            w.writerows(zip(map(repr, self.times().tolist()), map(repr, self.samples.tolist())))

    @classmethod
    def from_csv(cls, path) -> "SampledTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["t_seconds", "intensity_volts"]:
                raise ValueError(f"{path}: expected header t_seconds,intensity_volts")
            rows = [(float(a), float(b)) for a, b in reader]
        if len(rows) < 2:
            raise ValueError(f"{path}: need at least two samples")
        t, v = np.array(rows).T
        dt = np.diff(t)
        step = float(np.median(dt))
        if not step > 0 or np.max(np.abs(dt - step)) > 1e-3 * step + 1e-12:
            raise ValueError(f"{path}: samples are not uniformly spaced")
        # least-squares rate from all timestamps, robust to rounded text
        rate = 1.0 / float(np.polyfit(np.arange(t.size), t, 1)[0])
        return cls(rate=rate, samples=v, t0=float(t[0]))


def _count(duration: float, rate: float) -> int:
    # ceil(duration * rate), forgiving float noise in the product
    return max(0, math.ceil(round(duration * rate, 6)))


def _phase(rx: ReceiverModel, seed: int) -> float:
    return float(_rng(seed, _STREAM_PHASE).random()) if rx.phase is None else float(rx.phase)


def _noise(n: int, sigma: float, seed: int) -> np.ndarray:
    # always draw, so that traces differing only in sigma share one realisation
    return sigma * _rng(seed, _STREAM_NOISE).standard_normal(n)


def sample_photodiode(w: Waveform, rx: ReceiverModel, seed: int = 0) -> SampledTrace:
    if rx.kind is not ReceiverKind.PHOTODIODE:
        raise ValueError("sample_photodiode needs a photodiode receiver")
    rate = rx.sample_rate
    t0 = _phase(rx, seed) / rate
    n = _count(w.duration, rate)
    if n == 0 or len(w) == 0:
        values = np.zeros(n)
    else:
        # edge positions in sample units; snap float noise so that an edge
        # landing on a sample instant belongs to the segment it opens
        pos = (w.edges - t0) * rate
        near = np.round(pos)
        pos = np.where(np.abs(pos - near) < 1e-3, near, pos)
        idx = np.searchsorted(pos, np.arange(n), side="right") - 1
        values = w.levels[np.clip(idx, 0, len(w) - 1)]
    samples = values + _noise(n, rx.noise_sigma, seed)
    return SampledTrace(rate, samples, t0, 0.0, {"receiver": "photodiode"})


def sample_camera(w: Waveform, rx: ReceiverModel, seed: int = 0) -> SampledTrace:
    if rx.kind is not ReceiverKind.CAMERA:
        raise ValueError("sample_camera needs a camera receiver")
    rate = rx.fps
    t0 = _phase(rx, seed) / rate
    n = _count(w.duration, rate)
    exposure = rx.exposure_fraction / rate
    a = np.clip(t0 + np.arange(n) / rate, 0.0, w.duration)
    b = np.clip(a + exposure, 0.0, w.duration)
    width = b - a
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = (w.integral(b) - w.integral(a)) / width
    mean = np.where(width > 0, mean, w.value_at(a)) if n else np.zeros(0)
    samples = mean + _noise(n, rx.noise_sigma, seed)
    return SampledTrace(rate, samples, t0, exposure, {"receiver": "camera"})


def sample(w: Waveform, rx: ReceiverModel, seed: int = 0) -> SampledTrace:
    if rx.kind is ReceiverKind.CAMERA:
        return sample_camera(w, rx, seed)
    return sample_photodiode(w, rx, seed)
