import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hddled.cli import EXIT_CONFIG, EXIT_DECODE, EXIT_OK, main
from hddled.rxmodel import SampledTrace

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def small_ini(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text("# small link\n[payload]\nbits = 512\n")
    return p


class TestCommands:
    def test_encode(self, tmp_path, small_ini):
        assert main(["encode", "--config", str(small_ini), "--out", str(tmp_path)]) == EXIT_OK
        lines = (tmp_path / "frames.txt").read_text().splitlines()
        assert len(lines) == 2 and all(len(x) == 280 and x.startswith("10101010") for x in lines)

    def test_modulate(self, tmp_path, small_ini):
        assert main(["modulate", "--config", str(small_ini), "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "schedule.csv").read_text().startswith("op,size_bytes,offset_block,duration_seconds\n")
        assert (tmp_path / "waveform.csv").read_text().startswith("t_start_seconds,t_end_seconds,intensity_volts\n")

    def test_simulate_then_decode(self, tmp_path, small_ini):
        trace = tmp_path / "trace.csv"
        assert main(["simulate", "--config", str(small_ini), "--out", str(tmp_path),
                     "--trace-out", str(trace)]) == EXIT_OK
        with open(tmp_path / "report.csv", newline="") as fh:
            assert next(csv.DictReader(fh))["ber"] == "0.0"
        dec = tmp_path / "dec"
        assert main(["decode", "--config", str(small_ini), "--trace", str(trace), "--out", str(dec)]) == EXIT_OK
        assert len((dec / "payloads.txt").read_text().splitlines()) == 2

    def test_decode_nothing(self, tmp_path):
        trace = tmp_path / "noise.csv"
        SampledTrace(200e3, np.random.default_rng(0).normal(0, 1, 5000)).to_csv(trace)
        assert main(["decode", "--trace", str(trace), "--out", str(tmp_path)]) == EXIT_DECODE

    def test_sweep(self, tmp_path, small_ini):
        assert main(["sweep", "--config", str(small_ini), "--axis", "receiver.noise_sigma",
                     "--values", "0,2", "--out", str(tmp_path)]) == EXIT_OK
        rows = list(csv.DictReader(open(tmp_path / "sweep.csv", newline="")))
        assert [r["axis_value"] for r in rows] == ["0.0", "2.0"]

    def test_seed_override_changes_payload(self, tmp_path, small_ini):
        main(["encode", "--config", str(small_ini), "--out", str(tmp_path / "a"), "--seed", "1"])
        main(["encode", "--config", str(small_ini), "--out", str(tmp_path / "b"), "--seed", "2"])
        assert (tmp_path / "a" / "frames.txt").read_text() != (tmp_path / "b" / "frames.txt").read_text()


class TestExitCodes:
    def test_empty_payload(self, tmp_path):
        assert main(["simulate", "--config", str(FIXTURES / "empty_payload.ini"), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        assert main(["encode", "--config", str(tmp_path / "none.ini")]) == EXIT_CONFIG

    def test_bad_axis(self, tmp_path, small_ini):
        assert main(["sweep", "--config", str(small_ini), "--axis", "receiver.kind", "--values", "1",
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_bad_values(self, tmp_path, small_ini):
        assert main(["sweep", "--config", str(small_ini), "--axis", "noise_sigma", "--values", "a,b",
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_bad_trace(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("x,y\n")
        assert main(["decode", "--trace", str(p), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "hddled", "encode", "--config",
                               str(FIXTURES / "empty_payload.ini"), "--out", str(tmp_path)],
                              capture_output=True, text=True)
        assert proc.returncode == EXIT_CONFIG
        assert "config error" in proc.stderr
