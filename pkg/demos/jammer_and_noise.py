"""Degrading the link: a background reader on the same LED, then sensor noise.

Writes jammer_sweep.csv and noise_sweep.csv (plot-ready) into --out.

    python3 demos/jammer_and_noise.py [--out DIR] [--workers N]
"""
import argparse
from pathlib import Path

from hddled.harness import ExperimentConfig, sweep


def show(title, rows):
    print(title)
    for row in rows:
        print(f"  {float(row['axis_value']):6.2f}  BER {float(row['ber']):.3f}  FER {float(row['fer']):.3f}  "
              f"sync failures {row['sync_failures']}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=".")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cfg = ExperimentConfig(payload_bits=2048)
    show("jammer duty (peak-rate OOK, signal duty 0.5)",
         sweep(cfg, "jammer.duty", [0, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75], out / "jammer_sweep.csv", args.workers))
    show("receiver noise sigma, volts (5.3 V swing)",
         sweep(cfg, "receiver.noise_sigma", [0, 1, 2, 3, 4, 6, 8], out / "noise_sweep.csv", args.workers))


if __name__ == "__main__":
    main()
