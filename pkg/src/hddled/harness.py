"""Experiment runner: one config in, one link report out.

A run chains framing -> line code -> read/sleep schedule -> channel ->
receiver -> decoder. Configs are INI files (``section.key = value``), every
field has a default, and each report row echoes the whole config so rows
stand on their own.
"""
from __future__ import annotations

import configparser
import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .calibration import LedCalibration
from .demod import LinkReport, decode_link
from .errors import CalibrationRangeError, ConfigError, InvalidAxis
from .framing import FIXED_PAYLOAD_BITS, FrameKind, FramingScheme, bits_from_bytes, encode_frame, split_payload
from .linecode import Modulation, ModulationScheme, SymbolTimeline, modulate_frames
from .rxmodel import ChannelConfig, Jammer, ReceiverKind, ReceiverModel, SampledTrace, apply_channel, sample
from .txmodel import OpSchedule, Waveform, transmit

REPORT_HEADER = ["axis_value", "ber", "fer", "throughput_bps", "sync_failures"]
REPORT_EXTRA = ["frames_sent", "frames_detected", "frames_ok", "frames_crc_failed", "bits_sent",
                "bit_errors", "channel_rate_bps", "swing_volts", "duration_seconds"]

# payload rng is kept apart from the channel/receiver streams of the same seed
_PAYLOAD_STREAM = 7


@dataclass(frozen=True)
class ExperimentConfig:
    # [payload]
    payload_source: str = "random"  # random | hex | file
    payload_bits: int = 4096
    payload_hex: str = ""
    payload_path: str = ""
    # [framing]
    framing: str = "fixed"
    chunk_bits: int = 1024  # variable framing only; fixed frames carry 256 bits
    # [modulation]
    modulation: str = "ook"
    slot_time: float = 0.18e-3
    bit_rate: float = 0.0  # if > 0, overrides slot_time
    bfsk_s1: int = 256_000
    bfsk_s0: int = 512_000
    bfsk_guard: float = 1.2e-3
    # [led]
    led_color: str = "red"
    calibration: str = ""  # CSV path; empty = built-in table
    # [channel]
    distance: float = 1.0
    attenuation_ref: float = 1.0
    ambient: float = 0.0
    edge_jitter_sigma: float = 0.0
    # [jammer]
    jammer_duty: float = 0.0  # 0 disables the jammer
    jammer_mean_pulse: float = 1e-3
    jammer_amplitude: float = -1.0  # < 0: same LED, same brightness as the signal
    # [receiver]
    receiver: str = "photodiode"
    sample_rate: float = 200e3
    fps: float = 30.0
    exposure_fraction: float = 0.9
    noise_sigma: float = 0.0
    phase: float = 0.0  # < 0: drawn from the seed
    # [run]
    seed: int = 0
    repetitions: int = 1
    report: str = ""
    trace_out: str = ""

    def __post_init__(self):
        validate_config(self)

    @property
    def slots_per_bit(self) -> int:
        return 2 if self.modulation == "manchester" else 1

    @property
    def effective_slot(self) -> float:
        if self.bit_rate > 0:
            return 1.0 / (self.bit_rate * self.slots_per_bit)
        return self.slot_time

    def with_value(self, name: str, value) -> "ExperimentConfig":
        name = _field_name(name)
        kind = _FIELD_TYPES[name]
        try:
            value = kind(value) if kind is not int else int(round(float(value)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{_KEYS[name]}: cannot use {value!r}") from exc
        return replace(self, **{name: value})

    # -- serialisation ----------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for name, (section, key) in _KEYS_SPLIT.items():
            if not cp.has_section(section):
                cp.add_section(section)
            cp.set(section, key, _fmt(getattr(self, name)))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, base_dir: str | os.PathLike | None = None) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        values = {}
        for section in cp.sections():
            for key, raw in cp.items(section):
                name = _BY_KEY.get(f"{section}.{key}")
                if name is None:
                    raise ConfigError(f"unknown config key {section}.{key}")
                kind = _FIELD_TYPES[name]
                try:
                    values[name] = kind(raw.strip()) if kind is not int else int(float(raw))
                except ValueError as exc:
                    raise ConfigError(f"{section}.{key}: expected {kind.__name__}, got {raw!r}") from exc
        if base_dir is not None:
            for name in ("payload_path", "calibration"):
                if values.get(name) and not os.path.isabs(values[name]):
                    values[name] = os.path.normpath(os.path.join(base_dir, values[name]))
        return cls(**values)

    def echo(self) -> dict[str, str]:
        """Every field under its ``section.key`` name, formatted for CSV."""
        return {_KEYS[name]: _fmt(getattr(self, name)) for name in _KEYS}


_SECTIONS = {
    "payload": ("payload_source", "payload_bits", "payload_hex", "payload_path"),
    "framing": ("framing", "chunk_bits"),
    "modulation": ("modulation", "slot_time", "bit_rate", "bfsk_s1", "bfsk_s0", "bfsk_guard"),
    "led": ("led_color", "calibration"),
    "channel": ("distance", "attenuation_ref", "ambient", "edge_jitter_sigma"),
    "jammer": ("jammer_duty", "jammer_mean_pulse", "jammer_amplitude"),
    "receiver": ("receiver", "sample_rate", "fps", "exposure_fraction", "noise_sigma", "phase"),
    "run": ("seed", "repetitions", "report", "trace_out"),
}


def _short_key(section: str, name: str) -> str:
    for prefix in (section + "_", "payload_", "jammer_", "led_"):
        if name.startswith(prefix):
            return name[len(prefix):]
    if name == section:
        return "kind"
    return name


_KEYS_SPLIT = {name: (sec, _short_key(sec, name)) for sec, names in _SECTIONS.items() for name in names}
_KEYS = {name: f"{sec}.{key}" for name, (sec, key) in _KEYS_SPLIT.items()}
_BY_KEY = {dotted: name for name, dotted in _KEYS.items()}
_FIELD_TYPES = {f.name: {"str": str, "int": int, "float": float}[f.type] for f in fields(ExperimentConfig)}
NUMERIC_FIELDS = tuple(n for n, t in _FIELD_TYPES.items() if t in (int, float))


def _field_name(axis: str) -> str:
    if axis in _FIELD_TYPES:
        return axis
    if axis in _BY_KEY:
        return _BY_KEY[axis]
    raise InvalidAxis(f"unknown parameter {axis!r}")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def validate_config(cfg: ExperimentConfig) -> None:
    def need(ok, key, msg):
        if not ok:
            raise ConfigError(f"{key}: {msg}")

    need(cfg.payload_source in ("random", "hex", "file"), "payload.source", "choose random, hex or file")
    need(cfg.payload_source != "random" or cfg.payload_bits > 0, "payload.bits", "must be positive")
    need(cfg.payload_source != "hex" or cfg.payload_hex.strip(), "payload.hex", "empty hex payload")
    need(cfg.payload_source != "file" or cfg.payload_path, "payload.path", "no payload file given")
    need(cfg.framing in ("fixed", "variable"), "framing.kind", "choose fixed or variable")
    need(cfg.chunk_bits > 0, "framing.chunk_bits", "must be positive")
    need(cfg.modulation in ("ook", "manchester", "bfsk"), "modulation.kind", "choose ook, manchester or bfsk")
    need(cfg.effective_slot > 0 and math.isfinite(cfg.effective_slot), "modulation.slot_time", "must be positive")
    need(cfg.receiver in ("photodiode", "camera"), "receiver.kind", "choose photodiode or camera")
    need(cfg.repetitions >= 1, "run.repetitions", "must be at least 1")
    need(0 <= cfg.jammer_duty <= 1, "jammer.duty", "must lie in [0, 1]")
    need(cfg.phase < 1, "receiver.phase", "must be < 1 (negative = random)")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_ini(text, base_dir=path.parent)


# --------------------------------------------------------------------------
# building blocks from a config
# --------------------------------------------------------------------------

def payload_bits(cfg: ExperimentConfig, seed: int | None = None) -> np.ndarray:
    seed = cfg.seed if seed is None else seed
    if cfg.payload_source == "random":
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, _PAYLOAD_STREAM])
        return rng.integers(0, 2, cfg.payload_bits).astype(np.uint8)
    if cfg.payload_source == "hex":
        try:
            data = bytes.fromhex(cfg.payload_hex)
        except ValueError as exc:
            raise ConfigError(f"payload.hex: {exc}") from exc
    else:
        try:
            data = Path(cfg.payload_path).read_bytes()
        except OSError as exc:
            raise ConfigError(f"payload.path: {exc}") from exc
    if not data:
        raise ConfigError(f"payload is empty ({cfg.payload_source})")
    return bits_from_bytes(data)


def framing_scheme(cfg: ExperimentConfig) -> FramingScheme:
    return FramingScheme(FrameKind(cfg.framing))


def calibration(cfg: ExperimentConfig) -> LedCalibration:
    try:
        if cfg.calibration:
            return LedCalibration.from_csv(cfg.calibration, cfg.led_color)
        return LedCalibration.for_color(cfg.led_color)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"led: {exc}") from exc


def modulation_scheme(cfg: ExperimentConfig, calib: LedCalibration | None = None) -> ModulationScheme:
    try:
        if cfg.modulation == "bfsk":
            scheme = ModulationScheme.bfsk(cfg.bfsk_s1, cfg.bfsk_s0, cfg.bfsk_guard)
            if calib is not None:
                scheme.check_separable(calib, cfg.edge_jitter_sigma)
            return scheme
        return ModulationScheme(Modulation(cfg.modulation), cfg.effective_slot, cfg.effective_slot)
    except (ValueError, CalibrationRangeError) as exc:
        raise ConfigError(f"modulation: {exc}") from exc


def channel_config(cfg: ExperimentConfig, calib: LedCalibration, seed: int) -> ChannelConfig:
    jammer = None
    if cfg.jammer_duty > 0:
        amp = calib.amplitude if cfg.jammer_amplitude < 0 else cfg.jammer_amplitude
        jammer = Jammer(cfg.jammer_duty, cfg.jammer_mean_pulse, amp)
    try:
        return ChannelConfig(cfg.distance, cfg.attenuation_ref, cfg.ambient, cfg.edge_jitter_sigma, jammer, seed)
    except ValueError as exc:
        raise ConfigError(f"channel: {exc}") from exc


def receiver_model(cfg: ExperimentConfig) -> ReceiverModel:
    phase = None if cfg.phase < 0 else cfg.phase
    try:
        return ReceiverModel(ReceiverKind(cfg.receiver), cfg.fps, cfg.exposure_fraction, cfg.sample_rate,
                             cfg.noise_sigma, phase)
    except ValueError as exc:
        raise ConfigError(f"receiver: {exc}") from exc


def payload_frames(bits, cfg: ExperimentConfig) -> list[np.ndarray]:
    framing = framing_scheme(cfg)
    chunk = FIXED_PAYLOAD_BITS if framing.kind is FrameKind.FIXED else cfg.chunk_bits
    return split_payload(bits, framing, chunk)


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------

@dataclass
class LinkRun:
    """Everything one simulated transmission produced."""

    chunks: list[np.ndarray]  # payload carried by each frame (fixed frames are zero-padded)
    frames: list[np.ndarray]
    timeline: SymbolTimeline
    schedule: OpSchedule
    emitted: Waveform
    received: Waveform
    trace: SampledTrace
    payloads: list[np.ndarray]
    report: LinkReport


def simulate(cfg: ExperimentConfig, seed: int | None = None) -> LinkRun:
    """One transmission with ``seed`` (default: the config's)."""
    seed = cfg.seed if seed is None else int(seed)
    calib = calibration(cfg)
    scheme = modulation_scheme(cfg, calib)
    framing = framing_scheme(cfg)
    chunks = payload_frames(payload_bits(cfg, seed), cfg)
    frames = [encode_frame(c, framing) for c in chunks]
    try:
        timeline = modulate_frames(frames, scheme, calib)
        schedule, emitted = transmit(timeline, calib)
    except CalibrationRangeError as exc:
        raise ConfigError(f"modulation: slot or pulse times outside the LED calibration: {exc}") from exc
    received = apply_channel(emitted, channel_config(cfg, calib, seed))
    trace = sample(received, receiver_model(cfg), seed)
    truth = np.concatenate(chunks)
    payloads, report = decode_link(trace, scheme, framing, truth, calib)
    report.frames_sent = len(frames)
    report.bits_sent = int(truth.size)
    report.channel_rate = sum(f.size for f in frames) / timeline.duration
    return LinkRun(chunks, frames, timeline, schedule, emitted, received, trace, payloads, report)


def run_link(cfg: ExperimentConfig) -> LinkReport:
    """All repetitions of a config (seeds ``seed``, ``seed + 1``, ...), pooled.

    Writes ``cfg.report`` (one CSV row) and ``cfg.trace_out`` (first
    repetition's trace) when set.
    """
    report = None
    for rep in range(cfg.repetitions):
        run = simulate(cfg, cfg.seed + rep)
        if rep == 0 and cfg.trace_out:
            run.trace.to_csv(cfg.trace_out)
        report = run.report if report is None else report.merge(run.report)
    if cfg.report:
        write_report(cfg.report, [report_row(cfg, report)])
    return report


def report_row(cfg: ExperimentConfig, report: LinkReport, axis_value=None) -> dict[str, str]:
    row = {
        "axis_value": _fmt(axis_value),
        "ber": _fmt(report.ber),
        "fer": _fmt(report.fer),
        "throughput_bps": _fmt(float(report.throughput)),
        "sync_failures": str(report.sync_failures),
        "frames_sent": _fmt(report.frames_sent),
        "frames_detected": str(report.frames_detected),
        "frames_ok": str(report.frames_ok),
        "frames_crc_failed": str(report.frames_crc_failed),
        "bits_sent": _fmt(report.bits_sent),
        "bit_errors": str(report.bit_errors),
        "channel_rate_bps": _fmt(report.channel_rate),
        "swing_volts": _fmt(float(report.swing)),
        "duration_seconds": _fmt(float(report.duration)),
    }
    row.update(cfg.echo())
    return row


def write_report(path, rows: list[dict[str, str]]) -> None:
    header = REPORT_HEADER + REPORT_EXTRA + list(_KEYS.values())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _run_point(args):
    cfg, value = args
    return report_row(cfg, run_link(cfg), value)


def sweep(cfg: ExperimentConfig, axis: str, values, out=None, workers: int = 1) -> list[dict[str, str]]:
    """One :func:`run_link` per axis value, rows ordered as ``values``.

    ``axis`` is a numeric config field, by field name (``noise_sigma``) or
    ``section.key`` (``receiver.noise_sigma``). Rows are written to ``out``
    as CSV when given.
    """
    name = _field_name(axis)
    if name not in NUMERIC_FIELDS:
        raise InvalidAxis(f"{axis!r} is not a numeric parameter")
    values = list(values)
    if not values:
        raise InvalidAxis("sweep needs at least one value")
    # per-point side outputs would overwrite each other
    base = replace(cfg, report="", trace_out="")
    jobs = [(base.with_value(name, v), v) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(j) for j in jobs]
    if out is not None:
        write_report(out, rows)
    return rows
