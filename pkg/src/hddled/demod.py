"""Receiver: sampled trace -> bits -> frames.

Pipeline per frame:

1. global ON/OFF threshold from robust low/high levels;
2. preamble lock: correlate the hard-decided trace against the idle gap +
   modulated preamble over a +-20 % time-scale grid, refine the scale
   parabolically;
3. clock fit (OOK/Manchester): least-squares line through the observed
   transitions, grown progressively over the frame; Manchester additionally
   re-centres every 8 bits on its mid-bit transitions;
4. slot decisions from the mean of each slot's central 60 %, or pulse-width
   measurement for B-FSK;
5. :func:`~hddled.framing.parse_frame`.

Traces are first put on an internal uniform grid with at least 8 points per
shortest symbol (sample-and-hold around each sample's centre time) and at
most ~64 (block averaging), so that the same search works for 30 fps
cameras and 200 kS/s photodiodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import LedCalibration
from .errors import (
    CrcMismatch,
    DegenerateTrace,
    FramingError,
    InvalidSymbol,
    PreambleMismatch,
    SyncNotFound,
    TruncatedFrame,
)
from .framing import (
    FIXED,
    PREAMBLE,
    SIZE_FIELD_BITS,
    BitStream,
    FrameKind,
    FramingScheme,
    as_bits,
    bits_to_int,
    parse_frame,
)
from .linecode import Modulation, ModulationScheme, idle_gap, modulate, symbols_to_bits
from .rxmodel import SampledTrace

SYNC_MIN_CONFIDENCE = 0.6
SCALE_SPAN = 0.2
SCALE_POINTS = 51
SLOT_CENTRE = (0.2, 0.8)
MANCHESTER_TRACK_BITS = 8
MIN_GRID_PER_SYMBOL = 8
MAX_GRID_PER_SYMBOL = 64


@dataclass
class SyncEstimate:
    bit_period: float  # seconds
    frame_start: int  # sample index of the preamble's first slot
    threshold: float  # volts
    confidence: float  # normalised correlation, 0..1
    start_time: float = 0.0  # seconds, same instant as frame_start
    scale: float = 1.0  # recovered time scale relative to the nominal scheme


@dataclass
class LinkReport:
    frames_detected: int = 0
    frames_ok: int = 0
    frames_crc_failed: int = 0
    sync_failures: int = 0
    ber: float | None = None
    throughput: float = 0.0  # accepted payload bit/s over the trace duration
    bits_accepted: int = 0
    bit_errors: int = 0
    bits_compared: int = 0
    duration: float = 0.0
    swing: float = 0.0  # high - low level seen by the receiver, volts
    frames_sent: int | None = None
    bits_sent: int | None = None
    channel_rate: float | None = None  # frame bits sent per second of channel time

    @property
    def fer(self) -> float | None:
        if not self.frames_sent:
            return None
        return 1.0 - min(self.frames_ok, self.frames_sent) / self.frames_sent

    def merge(self, other: "LinkReport") -> "LinkReport":
        """Combine two reports (e.g. repetitions) by pooling counts."""
        out = LinkReport()
        for name in ("frames_detected", "frames_ok", "frames_crc_failed", "sync_failures",
                     "bits_accepted", "bit_errors", "bits_compared"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        out.duration = self.duration + other.duration
        out.throughput = out.bits_accepted / out.duration if out.duration > 0 else 0.0
        out.swing = (self.swing * self.duration + other.swing * other.duration) / out.duration \
            if out.duration > 0 else 0.0
        if self.frames_sent is not None and other.frames_sent is not None:
            out.frames_sent = self.frames_sent + other.frames_sent
        if self.bits_sent is not None and other.bits_sent is not None:
            out.bits_sent = self.bits_sent + other.bits_sent
        if self.ber is not None and other.ber is not None:
            n1, n2 = self.bits_sent or 1, other.bits_sent or 1
            out.ber = (self.ber * n1 + other.ber * n2) / (n1 + n2)
        if self.channel_rate is not None and other.channel_rate is not None and out.duration > 0:
            out.channel_rate = (self.channel_rate * self.duration + other.channel_rate * other.duration) \
                / out.duration
        return out


# --------------------------------------------------------------------------
# threshold
# --------------------------------------------------------------------------

def estimate_levels(samples, integrating: bool = False) -> tuple[float, float, float]:
    """Robust (low, high, noise sigma) of a trace.

    Noise is the MAD of first differences, which ignores the few
    differences that straddle a transition. Integrating receivers (cameras)
    also record partial exposures at every edge, and at two frames per slot
    nearly every difference can touch one; for them the pooled MAD inside
    the low and high classes is used when it is smaller.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DegenerateTrace("empty trace")
    low, high = np.percentile(x, [5, 95])
    if x.size < 3:
        return float(low), float(high), 0.0
    d = np.diff(x)
    noise = 1.4826 * float(np.median(np.abs(d - np.median(d)))) / math.sqrt(2)
    if integrating:
        mid = 0.5 * (low + high)
        spread = []
        for cls in (x[x <= mid], x[x > mid]):
            if cls.size:
                spread.append((cls.size, 1.4826 * float(np.median(np.abs(cls - np.median(cls))))))
        pooled = math.sqrt(sum(n * v * v for n, v in spread) / sum(n for n, _ in spread))
        noise = min(noise, pooled)
    return float(low), float(high), noise


def estimate_threshold(trace: SampledTrace) -> float:
    """Midpoint between the 5th and 95th percentile levels."""
    low, high, noise = estimate_levels(trace.samples, trace.aperture > 0)
    if high - low <= 4 * noise:
        raise DegenerateTrace(f"contrast {high - low:.3g} V is within 4x noise ({noise:.3g} V)")
    return 0.5 * (low + high)


# --------------------------------------------------------------------------
# internal grid
# --------------------------------------------------------------------------

@dataclass
class _Grid:
    values: np.ndarray
    rate: float
    t0: float  # centre time of point 0
    threshold: float
    edges: tuple[np.ndarray, np.ndarray] | None = None  # (times, rising) if known more finely
    smooth: int = 1  # boxcar length applied before hard decisions, odd
    hard: np.ndarray = field(init=False)
    cum: np.ndarray = field(init=False)
    edge_times: np.ndarray = field(init=False)
    edge_rising: np.ndarray = field(init=False)

    def __post_init__(self):
        level = self.values
        if self.smooth > 1 and self.values.size >= self.smooth:
            # centred, so edges are not delayed; ends keep their raw values
            h = self.smooth // 2
            level = self.values.copy()
            level[h:-h] = np.convolve(self.values, np.full(self.smooth, 1.0 / self.smooth), mode="valid")
        self.hard = np.where(level > self.threshold, 1.0, -1.0)
        self.cum = np.r_[0.0, np.cumsum(self.values)]
        if self.edges is None:
            flips = np.flatnonzero(self.hard[1:] != self.hard[:-1])
            self.edge_times = self.t0 + (flips + 0.5) / self.rate
            self.edge_rising = self.hard[flips + 1] > 0
        else:
            self.edge_times, self.edge_rising = self.edges

    @classmethod
    def build(cls, trace: SampledTrace, shortest: float, threshold: float) -> "_Grid":
        per_symbol = shortest * trace.rate
        centre0 = trace.t0 + 0.5 * trace.aperture
        x = trace.samples
        if per_symbol < MIN_GRID_PER_SYMBOL:
            up = math.ceil(MIN_GRID_PER_SYMBOL / per_symbol)
            rate = trace.rate * up
            return cls(np.repeat(x, up), rate, centre0 - 0.5 / trace.rate + 0.5 / rate, threshold,
                       _sparse_edges(trace, threshold))
        down = int(per_symbol // (MAX_GRID_PER_SYMBOL // 2)) if per_symbol > MAX_GRID_PER_SYMBOL else 1
        smooth = 2 * int(per_symbol / down / 8) + 1  # about a quarter symbol
        if down > 1:
            n = x.size // down
            x = x[: n * down].reshape(n, down).mean(axis=1)
            return cls(x, trace.rate / down, centre0 + (down - 1) / (2 * trace.rate), threshold, smooth=smooth)
        return cls(x.copy(), trace.rate, centre0, threshold, smooth=smooth)

    def __len__(self) -> int:
        return self.values.size

    def rise_fall(self) -> tuple[np.ndarray, np.ndarray]:
        if getattr(self, "_rise_fall", None) is None:
            self._rise_fall = (self.edge_times[self.edge_rising], self.edge_times[~self.edge_rising])
        return self._rise_fall

    def padded_cum(self, pad: int) -> np.ndarray:
        """Cumulative sum of the hard decisions preceded by ``pad`` OFF points."""
        cached = getattr(self, "_padded", None)
        if cached is None or cached[0] != pad:
            cum = np.r_[0.0, np.cumsum(np.r_[np.full(pad, -1.0), self.hard])]
            self._padded = cached = (pad, cum)
        return cached[1]

    @property
    def t_end(self) -> float:
        return self.t0 + (len(self) - 0.5) / self.rate

    def index(self, t) -> np.ndarray:
        return (np.asarray(t, dtype=float) - self.t0) * self.rate

    def window_means(self, a, b) -> tuple[np.ndarray, np.ndarray]:
        """Mean of grid values with centres in [a, b]; nearest point if none.

        Returns (means, valid) where ``valid`` is False for windows outside
        the grid.
        """
        lo = np.ceil(self.index(a) - 1e-9).astype(np.int64)
        hi = np.floor(self.index(b) + 1e-9).astype(np.int64)
        empty = hi < lo
        mid = np.round(self.index(0.5 * (np.asarray(a) + np.asarray(b)))).astype(np.int64)
        lo = np.where(empty, mid, lo)
        hi = np.where(empty, mid, hi)
        valid = (lo >= 0) & (hi < len(self))
        lo = np.clip(lo, 0, len(self) - 1)
        hi = np.clip(hi, lo, len(self) - 1)
        means = (self.cum[hi + 1] - self.cum[lo]) / (hi - lo + 1)
        return means, valid


def _sparse_edges(trace: SampledTrace, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Edge times of a coarsely sampled trace, located inside the exposure windows.

    A sample whose exposure window contains an edge reads the lit fraction
    of that window, so the total lit (rising) or dark (falling) exposure of
    the two samples around a threshold crossing pins the edge down exactly
    for a noiseless single edge. Point samples (no exposure) fall back to
    the midpoint between the two sample instants.
    """
    x = trace.samples
    dt = 1.0 / trace.rate
    hard = x > threshold
    flips = np.flatnonzero(hard[1:] != hard[:-1])
    rising = hard[flips + 1]
    low, high = np.percentile(x, [5, 95])
    f = np.clip((x - low) / (high - low), 0.0, 1.0) if high > low else hard.astype(float)
    e = min(trace.aperture, dt)
    lit = f[flips] + f[flips + 1]
    m = np.where(rising, lit, 2.0 - lit) * e
    a = trace.t0 + flips * dt  # window start of the earlier sample
    t = np.where(m > e, a + 2 * e - m, np.where(m < e, a + dt + e - m, a + 0.5 * (e + dt)))
    return t, rising


# --------------------------------------------------------------------------
# preamble lock
# --------------------------------------------------------------------------

@dataclass
class _Template:
    scale: float
    levels: np.ndarray  # +-1 per grid point
    lead: float  # seconds of idle gap before the preamble
    bounds: np.ndarray = field(init=False)  # run boundaries, grid points
    run_levels: np.ndarray = field(init=False)

    def __post_init__(self):
        change = np.flatnonzero(self.levels[1:] != self.levels[:-1]) + 1
        self.bounds = np.r_[0, change, self.levels.size]
        self.run_levels = self.levels[self.bounds[:-1]]


class _Bank(list):
    """Templates over the scale grid, with their runs stacked for vectorised correlation."""

    def __init__(self, templates):
        super().__init__(templates)
        rmax = max(t.run_levels.size for t in self)
        self.bounds = np.array([np.r_[t.bounds, np.full(rmax + 1 - t.bounds.size, t.bounds[-1])] for t in self])
        self.run_levels = np.array([np.r_[t.run_levels, np.zeros(rmax - t.run_levels.size)] for t in self])
        self.sizes = np.array([t.levels.size for t in self])


def _templates(scheme: ModulationScheme, calib: LedCalibration | None, rate: float) -> _Bank:
    gap = idle_gap(scheme, calib)
    pre = modulate(PREAMBLE, scheme, calib)
    levels = np.r_[gap.levels, pre.levels]
    durations = np.r_[gap.durations, pre.durations]
    out = []
    for scale in 1.0 + SCALE_SPAN * np.linspace(-1.0, 1.0, SCALE_POINTS):
        edges = np.r_[0.0, np.cumsum(durations * scale)]
        n = int(math.floor(edges[-1] * rate))
        t = (np.arange(n) + 0.5) / rate
        seg = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, levels.size - 1)
        out.append(_Template(float(scale), np.where(levels[seg] == 1, 1.0, -1.0), gap.duration * scale))
    return _Bank(out)


_LOCK_CHUNK = 4096


def _correlations(grid: _Grid, templates: _Bank, pad: int, o_lo: int, width: int) -> np.ndarray:
    """Normalised correlation of every template at offsets o_lo .. o_lo + width - 1.

    Templates are runs of constant +-1, so each correlation is a signed sum
    of run totals read off the cumulative sum of the hard decisions.
    """
    cum = grid.padded_cum(pad)
    bounds, levels, sizes = templates.bounds, templates.run_levels, templates.sizes
    corr = np.full((len(templates), width), -np.inf)
    for c0 in range(0, width, _LOCK_CHUNK):
        o = pad + o_lo + np.arange(c0, min(width, c0 + _LOCK_CHUNK))
        idx = o[None, None, :] + bounds[:, :, None]
        fits = idx[:, -1, :] < cum.size
        g = cum[np.minimum(idx, cum.size - 1)]
        c = np.einsum("sr,srw->sw", levels, np.diff(g, axis=1)) / sizes[:, None]
        corr[:, c0:c0 + o.size] = np.where(fits, c, -np.inf)
    return corr


def _lock(grid: _Grid, templates: _Bank, t_lo: float, t_hi: float,
          shortest: float) -> tuple[float, float, float] | None:
    """Best (preamble start time, scale, confidence) for template starts in [t_lo, t_hi]."""
    # the trace may start inside the leading idle gap: treat time before it as OFF
    pad = int(math.ceil(max(t.lead for t in templates) * grid.rate))
    o_lo = max(-pad, int(math.floor(grid.index(t_lo))))
    o_hi = min(int(math.ceil(grid.index(t_hi))), len(grid) - min(t.levels.size for t in templates))
    if o_hi < o_lo:
        return None
    corr = _correlations(grid, templates, pad, o_lo, o_hi - o_lo + 1)
    best = corr.max(axis=0)
    peak = float(best.max())
    if not peak >= SYNC_MIN_CONFIDENCE:
        return None
    first = int(np.argmax(best >= max(SYNC_MIN_CONFIDENCE, peak - 0.1)))
    reach = max(1, int(round(0.5 * shortest * grid.rate)))
    o = first + int(np.argmax(best[first: first + reach + 1]))
    s = int(np.argmax(corr[:, o]))
    scale = templates[s].scale
    if 0 < s < len(templates) - 1:
        y0, y1, y2 = corr[s - 1, o], corr[s, o], corr[s + 1, o]
        denom = y0 - 2 * y1 + y2
        if np.isfinite(denom) and denom < 0:
            step = templates[s + 1].scale - templates[s].scale
            scale += float(np.clip(0.5 * (y0 - y2) / denom, -0.5, 0.5)) * step
    start = grid.t0 + (o_lo + o - 0.5) / grid.rate + templates[0].lead / templates[0].scale * scale
    return start, scale, float(min(1.0, corr[:, o].max()))


def _prepare(trace: SampledTrace, scheme: ModulationScheme, calib, threshold=None):
    if threshold is None:
        threshold = estimate_threshold(trace)
    shortest = scheme.shortest_feature(calib)
    grid = _Grid.build(trace, shortest, threshold)
    return grid, _templates(scheme, calib, grid.rate), shortest


def find_sync(trace: SampledTrace, scheme: ModulationScheme, calib: LedCalibration | None = None,
              *, t_min: float | None = None, t_max: float | None = None) -> SyncEstimate:
    """Locate the first frame preamble whose idle gap starts in [t_min, t_max]."""
    try:
        grid, templates, shortest = _prepare(trace, scheme, calib)
    except DegenerateTrace as exc:
        raise SyncNotFound(f"no signal: {exc}") from exc
    lo = grid.t0 - templates[-1].lead if t_min is None else t_min
    hi = grid.t_end if t_max is None else t_max
    hit = _lock(grid, templates, lo, hi, shortest)
    if hit is None:
        raise SyncNotFound("no preamble correlation above 0.6")
    return _estimate(trace, scheme, calib, grid, *hit)


def _estimate(trace, scheme, calib, grid, start, scale, conf) -> SyncEstimate:
    idx = int(round((start - trace.t0) * trace.rate))
    idx = min(max(idx, 0), max(len(trace) - 1, 0))
    return SyncEstimate(scheme.bit_period(calib) * scale, idx, grid.threshold, conf, start, scale)


# --------------------------------------------------------------------------
# slot clock (OOK / Manchester)
# --------------------------------------------------------------------------

def _preamble_clock(grid: _Grid, scheme: ModulationScheme, ts: float, period: float) -> tuple[float, float]:
    """Refit the slot clock on the preamble's own transitions.

    The preamble's transition slots are known, so its first edges after
    lock are matched to them in order and fitted by least squares. This
    removes the coarse scale error of the correlation grid before the
    progressive fit relies on rounding edges to slot boundaries.
    """
    levels = np.r_[0, modulate(PREAMBLE, scheme).levels]
    slots = np.flatnonzero(levels[1:] != levels[:-1]).astype(float)
    a = np.searchsorted(grid.edge_times, ts - 0.5 * period)
    te = grid.edge_times[a: a + slots.size]
    if te.size < slots.size or te[-1] > ts + (slots[-1] + 0.5) * period * (1 + SCALE_SPAN):
        return ts, period
    slope, icept = np.polyfit(slots, te, 1)
    if abs(slope / period - 1) > SCALE_SPAN or abs(icept - ts) > 0.5 * period:
        return ts, period
    return float(icept), float(slope)


def _fit_clock(grid: _Grid, ts: float, period: float, nslots: int) -> tuple[float, float]:
    """Least-squares slot clock through the transitions of the next ``nslots`` slots."""
    span = 16
    while True:
        span = min(span, nslots)
        a = np.searchsorted(grid.edge_times, ts - 0.5 * period)
        b = np.searchsorted(grid.edge_times, ts + (span + 0.5) * period)
        te = grid.edge_times[a:b]
        if te.size >= 3:
            k = np.round((te - ts) / period)
            r = te - ts - k * period
            good = np.abs(r) < 0.35 * period
            if good.sum() >= 3 and np.ptp(k[good]) >= 2:
                slope, icept = np.polyfit(k[good], te[good], 1)
                if abs(slope / period - 1) < 0.05:
                    ts, period = float(icept), float(slope)
        if span >= nslots:
            return ts, period
        span *= 2


def _manchester_offsets(grid: _Grid, ts: float, period: float, nslots: int) -> np.ndarray:
    """Per-slot timing correction from mid-bit transitions, updated every 8 bits."""
    block = 2 * MANCHESTER_TRACK_BITS
    offsets = np.zeros(nslots)
    current = 0.0
    for start in range(0, nslots, block):
        stop = min(nslots, start + block)
        a = np.searchsorted(grid.edge_times, ts + (start + current / period - 0.5) * period)
        b = np.searchsorted(grid.edge_times, ts + (stop + current / period + 0.5) * period)
        te = grid.edge_times[a:b] - current
        if te.size:
            k = np.round((te - ts) / period)
            # mid-bit transitions sit on odd slot boundaries
            r = te - ts - k * period
            sel = (k % 2 == 1) & (np.abs(r) < 0.35 * period)
            if sel.sum() >= 2:
                current += float(np.median(r[sel]))
        offsets[start:stop] = current
    return offsets


def _slot_levels(grid: _Grid, ts: float, period: float, nslots: int, offsets=None) -> np.ndarray:
    j = np.arange(nslots)
    base = ts + j * period + (0.0 if offsets is None else offsets)
    means, valid = grid.window_means(base + SLOT_CENTRE[0] * period, base + SLOT_CENTRE[1] * period)
    if not valid.all():
        raise TruncatedFrame("frame runs past the end of the trace")
    return (means > grid.threshold).astype(np.uint8)


def _read_slotted(grid, scheme, framing, ts, period) -> tuple[BitStream, float]:
    spb = scheme.slots_per_bit
    ts, period = _preamble_clock(grid, scheme, ts, period)
    if framing.kind is FrameKind.FIXED:
        nbits = framing.frame_bits()
    else:
        head = framing.header_bits * spb
        ts_h, p_h = _fit_clock(grid, ts, period, head)
        hbits = symbols_to_bits(_slot_levels(grid, ts_h, p_h, head), scheme)
        n = bits_to_int(hbits[-SIZE_FIELD_BITS:])
        if n == 0:
            raise TruncatedFrame("declared payload size is zero")
        nbits = framing.frame_bits(n)
        if ts + nbits * spb * period > grid.t_end + period:
            raise TruncatedFrame(f"declared size {n} bits runs past the trace")
    nslots = nbits * spb
    ts, period = _fit_clock(grid, ts, period, nslots)
    offsets = None
    if scheme.kind is Modulation.MANCHESTER:
        offsets = _manchester_offsets(grid, ts, period, nslots)
    slots = _slot_levels(grid, ts, period, nslots, offsets)
    end = ts + nslots * period + (0.0 if offsets is None else offsets[-1])
    return symbols_to_bits(slots, scheme), end


# --------------------------------------------------------------------------
# pulse widths (B-FSK)
# --------------------------------------------------------------------------

def _read_pulses(grid, scheme, calib, framing, ts, scale) -> tuple[BitStream, float]:
    guard = scheme.bfsk_guard * scale
    rise, fall = grid.rise_fall()
    i0 = int(np.searchsorted(rise, ts - 0.5 * guard))

    def widths(count):
        r = rise[i0: i0 + count]
        if r.size < count:
            raise TruncatedFrame("trace ends before the frame's last pulse")
        j0 = int(np.searchsorted(fall, r[0], side="right"))
        f = fall[j0: j0 + count]
        if f.size < count:
            raise TruncatedFrame("trace ends inside a pulse")
        return (f - r) / scale, float(f[-1])

    if framing.kind is FrameKind.FIXED:
        nbits = framing.frame_bits()
    else:
        w, _ = widths(framing.header_bits)
        n = bits_to_int(symbols_to_bits(w, scheme, calib)[-SIZE_FIELD_BITS:])
        if n == 0:
            raise TruncatedFrame("declared payload size is zero")
        nbits = framing.frame_bits(n)
    w, last_fall = widths(nbits)
    return symbols_to_bits(w, scheme, calib), last_fall + guard


# --------------------------------------------------------------------------
# link decoding
# --------------------------------------------------------------------------

def read_frame(trace: SampledTrace, sync: SyncEstimate, scheme: ModulationScheme,
               framing: FramingScheme = FIXED, calib: LedCalibration | None = None) -> BitStream:
    """Raw frame bits (not CRC-checked) starting at a sync estimate."""
    grid, _, _ = _prepare(trace, scheme, calib, sync.threshold)
    bits, _ = _read_frame(grid, scheme, calib, framing, sync.start_time, sync.scale)
    return bits


def _read_frame(grid, scheme, calib, framing, ts, scale):
    if scheme.kind is Modulation.BFSK:
        return _read_pulses(grid, scheme, calib, framing, ts, scale)
    return _read_slotted(grid, scheme, framing, ts, scheme.slot * scale)


def _frame_payload_raw(bits: BitStream, framing: FramingScheme) -> BitStream | None:
    """Payload bits of a frame that failed its CRC (for error counting)."""
    start = framing.header_bits
    n = framing.fixed_payload_bits if framing.kind is FrameKind.FIXED else \
        bits_to_int(bits[8:8 + SIZE_FIELD_BITS])
    if n <= 0 or bits.size < start + n:
        return None
    return bits[start:start + n].copy()


def _score(received: list[BitStream], truth: BitStream) -> tuple[int, int]:
    """(bit errors, truth bits matched) aligning frames in order against ``truth``.

    Each decoded payload is placed at the best of the next few frame-sized
    offsets; implausible matches (> 40 % differing) are ignored.
    """
    cursor = 0
    errors = matched = 0
    for p in received:
        n = p.size
        best = None
        for m in range(5):
            o = cursor + m * n
            if o + n > truth.size:
                break
            d = int(np.count_nonzero(truth[o:o + n] != p))
            if best is None or d < best[0]:
                best = (d, o)
        if best is None or best[0] > 0.4 * n:
            continue
        errors += best[0]
        matched += n
        cursor = best[1] + n
    return errors, matched


def decode_link(trace: SampledTrace, scheme: ModulationScheme, framing: FramingScheme = FIXED,
                truth=None, calib: LedCalibration | None = None) -> tuple[list[BitStream], LinkReport]:
    """Find, read and check every frame in a trace.

    Failures are counted in the report, never raised. ``truth`` (the
    concatenated transmitted payload bits) enables BER: bits of frames that
    were never decoded count as errors.
    """
    report = LinkReport(duration=trace.duration)
    payloads: list[BitStream] = []
    received: list[BitStream] = []
    truth_bits = None if truth is None else as_bits(truth)

    def finish():
        report.throughput = report.bits_accepted / report.duration if report.duration > 0 else 0.0
        if truth_bits is not None:
            errors, matched = _score(received, truth_bits)
            report.bit_errors = errors
            report.bits_compared = matched
            report.ber = (errors + truth_bits.size - matched) / truth_bits.size if truth_bits.size else 0.0
        return payloads, report

    if len(trace) == 0:
        return finish()
    low, high, _ = estimate_levels(trace.samples, trace.aperture > 0)
    report.swing = high - low
    try:
        grid, templates, shortest = _prepare(trace, scheme, calib)
    except DegenerateTrace:
        report.sync_failures += 1
        return finish()

    bit = scheme.bit_period(calib)
    lead = templates[0].lead
    tmpl_span = templates[0].levels.size / grid.rate
    if framing.kind is FrameKind.FIXED:
        frame_span = lead + framing.frame_bits() * bit
    else:
        frame_span = lead + 8 * tmpl_span
    wide = max(frame_span, 4 * tmpl_span)

    # the first idle gap may have started before the receiver did
    cursor = grid.t0 - 0.5 / grid.rate - lead * (1 + SCALE_SPAN)
    expected = False  # a frame just ended, the next gap should start right here
    unmatched = 0.0
    while cursor + tmpl_span * (1 - SCALE_SPAN) <= grid.t_end:
        hit = None
        if expected:
            hit = _lock(grid, templates, cursor - 2 * shortest, cursor + 2 * lead, shortest)
        while hit is None and cursor + tmpl_span * (1 - SCALE_SPAN) <= grid.t_end:
            hit = _lock(grid, templates, cursor, cursor + wide, shortest)
            if hit is None:
                cursor += wide
                unmatched += wide
                if unmatched >= frame_span:
                    report.sync_failures += 1
                    unmatched = 0.0
        if hit is None:
            break
        unmatched = 0.0
        start, scale, _ = hit
        report.frames_detected += 1
        try:
            bits, end = _read_frame(grid, scheme, calib, framing, start, scale)
            payload, _ = parse_frame(bits, framing)
        except CrcMismatch:
            report.frames_crc_failed += 1
            raw = _frame_payload_raw(bits, framing)
            if raw is not None:
                received.append(raw)
            cursor, expected = end, True
            continue
        except (PreambleMismatch, InvalidSymbol, TruncatedFrame, FramingError):
            cursor, expected = start + bit * scale - lead * scale / templates[0].scale, False
            continue
        payloads.append(payload)
        received.append(payload)
        report.frames_ok += 1
        report.bits_accepted += payload.size
        cursor, expected = end, True
    return finish()
