"""Simulation of an optical covert channel through a computer's HDD activity LED.

Layers, bottom up: :mod:`framing` (frames + CRC-16), :mod:`calibration`
(read size -> LED-ON time), :mod:`linecode` (OOK / Manchester / B-FSK),
:mod:`txmodel` (read/sleep schedules and emitted light), :mod:`rxmodel`
(channel, cameras and photodiodes), :mod:`demod` (sync, clock recovery,
decoding) and :mod:`harness` (configs, runs, sweeps).
"""
from .calibration import COLOR_PROFILES, LedCalibration, color_profile, inverse_s_of, t_on_of
from .demod import LinkReport, SyncEstimate, decode_link, estimate_threshold, find_sync, read_frame
from .errors import (
    CalibrationRangeError,
    ConfigError,
    CrcMismatch,
    DegenerateTrace,
    FramingError,
    InvalidAxis,
    InvalidSymbol,
    LinkError,
    PayloadSizeError,
    PreambleMismatch,
    SyncNotFound,
    TruncatedFrame,
)
from .framing import FIXED, VARIABLE, FrameKind, FramingScheme, crc16, encode_frame, parse_frame, split_payload
from .harness import ExperimentConfig, load_config, run_link, simulate, sweep
from .linecode import Modulation, ModulationScheme, SymbolTimeline, modulate, modulate_frames, symbols_to_bits
from .rxmodel import ChannelConfig, Jammer, ReceiverKind, ReceiverModel, SampledTrace, apply_channel, sample
from .txmodel import OpSchedule, Read, Sleep, Waveform, schedule_from_timeline, transmit

__version__ = "0.1.0"
