"""Leak a 4096-bit key over the HDD LED at the peak rate and read it back.

Walks the pipeline stage by stage: frames, read/sleep schedule, emitted
light, photodiode trace, decoded payload.

    python3 demos/key_exfiltration.py [--seed N] [--noise VOLTS]
"""
import argparse

import numpy as np

from hddled import harness
from hddled.framing import bits_to_bytes


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--noise", type=float, default=0.0, help="receiver noise sigma in volts")
    args = ap.parse_args()

    cfg = harness.ExperimentConfig(payload_bits=4096, seed=args.seed, noise_sigma=args.noise)
    run = harness.simulate(cfg)
    key = bits_to_bytes(np.concatenate(run.chunks))
    reads = run.schedule.sizes[run.schedule.is_read]

    print(f"key            {key[:16].hex()}... ({len(key) * 8} bits)")
    print(f"frames         {len(run.frames)} x {run.frames[0].size} bits")
    print(f"schedule       {reads.size} reads (sizes {sorted(set(reads.tolist()))} B), "
          f"{np.count_nonzero(~run.schedule.is_read)} sleeps")
    print(f"light          {run.emitted.duration:.3f} s, shortest pulse "
          f"{run.emitted.on_segments().min() * 1e3:.2f} ms at {run.emitted.levels.max()} V")
    print(f"trace          {len(run.trace)} samples at {run.trace.rate / 1e3:.0f} kHz")

    rep = run.report
    got = bits_to_bytes(np.concatenate(run.payloads)) if run.payloads else b""
    print(f"decoded        {rep.frames_ok}/{rep.frames_sent} frames, BER {rep.ber}, "
          f"channel rate {rep.channel_rate:.0f} bit/s")
    print(f"key recovered  {got == key}")


if __name__ == "__main__":
    main()
