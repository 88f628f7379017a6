"""Why a video camera tops out at half its frame rate.

Sweeps the OOK bit rate against a free-running 29.97 fps camera, then
shows that a camera locked to exactly 30 fps can still read 30 bit/s when
its exposure happens to line up with the bits.

    python3 demos/camera_ceiling.py
"""
from dataclasses import replace

from hddled.harness import ExperimentConfig, run_link, sweep


def main():
    cam = ExperimentConfig(receiver="camera", fps=29.97, phase=-1.0, payload_bits=4096)
    print("free-running 29.97 fps camera, 4096-bit payload")
    for row in sweep(cam, "bit_rate", [7.5, 10, 15, 20, 30, 60]):
        print(f"  {float(row['axis_value']):5.1f} bit/s  BER {float(row['ber']):.3f}  "
              f"frames {row['frames_ok']}/{row['frames_sent']}")

    locked = replace(cam, fps=30.0, bit_rate=30.0)
    print("\nlocked 30.000 fps camera at 30 bit/s, by exposure phase")
    for phase in (0.0, 0.25, 0.5, 0.75):
        rep = run_link(replace(locked, phase=phase))
        print(f"  phase {phase:.2f}  BER {rep.ber:.3f}")


if __name__ == "__main__":
    main()
