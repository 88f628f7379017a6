"""Command line entry point.

    hddled encode   --config exp.ini [--out DIR]
    hddled modulate --config exp.ini [--out DIR]
    hddled simulate --config exp.ini [--seed N] [--out DIR] [--trace-out PATH]
    hddled decode   --config exp.ini --trace trace.csv [--out DIR]
    hddled sweep    --config exp.ini --axis receiver.noise_sigma --values 0,0.5,1 [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 nothing decoded (decode).
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .demod import decode_link
from .errors import ConfigError
from .framing import bits_to_bytes, bits_to_str, encode_frame
from .linecode import modulate_frames
from .rxmodel import SampledTrace
from .txmodel import transmit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DECODE = 3


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_encode(args) -> int:
    cfg = _config(args)
    framing = harness.framing_scheme(cfg)
    frames = [encode_frame(c, framing) for c in harness.payload_frames(harness.payload_bits(cfg), cfg)]
    path = _out_dir(args) / "frames.txt"
    path.write_text("".join(bits_to_str(f) + "\n" for f in frames))
    print(f"{len(frames)} {cfg.framing} frames, {sum(f.size for f in frames)} bits -> {path}")
    return EXIT_OK


def cmd_modulate(args) -> int:
    cfg = _config(args)
    calib = harness.calibration(cfg)
    scheme = harness.modulation_scheme(cfg, calib)
    framing = harness.framing_scheme(cfg)
    frames = [encode_frame(c, framing) for c in harness.payload_frames(harness.payload_bits(cfg), cfg)]
    try:
        schedule, waveform = transmit(modulate_frames(frames, scheme, calib), calib)
    except ValueError as exc:
        raise ConfigError(f"modulation: {exc}") from exc
    out = _out_dir(args)
    schedule.to_csv(out / "schedule.csv")
    waveform.to_csv(out / "waveform.csv")
    print(f"{len(schedule)} operations, {waveform.duration:.6g} s of light -> {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    cfg = replace(cfg, report=str(out / "report.csv"), trace_out=args.trace_out or cfg.trace_out)
    report = harness.run_link(cfg)
    ber = "n/a" if report.ber is None else f"{report.ber:.4g}"
    print(f"frames ok {report.frames_ok}/{report.frames_sent}, crc failed {report.frames_crc_failed}, "
          f"sync failures {report.sync_failures}, BER {ber}, "
          f"throughput {report.throughput:.6g} bit/s, channel rate {report.channel_rate:.6g} bit/s")
    return EXIT_OK


def cmd_decode(args) -> int:
    cfg = _config(args)
    calib = harness.calibration(cfg)
    scheme = harness.modulation_scheme(cfg, calib)
    try:
        trace = SampledTrace.from_csv(args.trace)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"trace: {exc}") from exc
    payloads, report = decode_link(trace, scheme, harness.framing_scheme(cfg), None, calib)
    out = _out_dir(args)
    lines = []
    for p in payloads:
        lines.append(bits_to_bytes(p).hex() if p.size % 8 == 0 else bits_to_str(p))
    (out / "payloads.txt").write_text("".join(line + "\n" for line in lines))
    harness.write_report(out / "report.csv", [harness.report_row(cfg, report)])
    print(f"frames ok {report.frames_ok}/{report.frames_detected} detected, "
          f"crc failed {report.frames_crc_failed}, sync failures {report.sync_failures}")
    return EXIT_OK if report.frames_ok else EXIT_DECODE


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values: {exc}") from exc
    path = _out_dir(args) / "sweep.csv"
    rows = harness.sweep(cfg, args.axis, values, out=path, workers=args.workers)
    for row in rows:
        print(f"{args.axis}={row['axis_value']}: BER {row['ber']}, FER {row['fer']}, "
              f"throughput {row['throughput_bps']} bit/s")
    print(f"-> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hddled", description="HDD-LED optical covert channel simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="experiment INI file (defaults apply when omitted)")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        if seed:
            p.add_argument("--seed", type=int, help="override run.seed")

    p = sub.add_parser("encode", help="payload -> frame bits")
    common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("modulate", help="frame bits -> read/sleep schedule and waveform CSV")
    common(p)
    p.set_defaults(func=cmd_modulate)

    p = sub.add_parser("simulate", help="full link, writes report.csv")
    common(p)
    p.add_argument("--trace-out", help="also write the received trace CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decode", help="trace CSV -> payloads")
    common(p, seed=False)
    p.add_argument("--trace", required=True, help="trace CSV (t_seconds,intensity_volts)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="one run per value of a numeric parameter")
    common(p)
    p.add_argument("--axis", required=True, help="parameter, e.g. receiver.noise_sigma or bit_rate")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
