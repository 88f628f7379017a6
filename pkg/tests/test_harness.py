import csv
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hddled import harness
from hddled.errors import ConfigError, InvalidAxis
from hddled.harness import REPORT_HEADER, ExperimentConfig, load_config, run_link, simulate, sweep

FIXTURES = Path(__file__).parent / "fixtures"
SMALL = ExperimentConfig(payload_bits=512)


def load_config_again(cfg):
    return ExperimentConfig.from_ini(cfg.to_ini())


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults_are_peak_link(self):
        cfg = ExperimentConfig()
        assert (cfg.modulation, cfg.slot_time, cfg.receiver, cfg.sample_rate) == ("ook", 0.18e-3, "photodiode", 200e3)

    def test_ini_roundtrip(self):
        cfg = ExperimentConfig(modulation="manchester", bit_rate=15.0, receiver="camera", fps=29.97,
                               jammer_duty=0.25, payload_source="hex", payload_hex="deadbeef", seed=9)
        assert ExperimentConfig.from_ini(cfg.to_ini()) == cfg

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-4, 1.0), st.floats(0.0, 5.0), st.integers(0, 2**31 - 1), st.sampled_from(["ook", "manchester"]))
    def test_ini_roundtrip_property(self, slot, sigma, seed, kind):
        cfg = ExperimentConfig(slot_time=slot, noise_sigma=sigma, seed=seed, modulation=kind)
        assert ExperimentConfig.from_ini(cfg.to_ini()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_ini("[receiver]\nfsp = 30\n")

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_ini("[receiver]\nfps = fast\n")

    @pytest.mark.parametrize("field,value", [("modulation", "qam"), ("framing", "jumbo"), ("repetitions", 0),
                                             ("jammer_duty", 1.5), ("receiver", "eye")])
    def test_invalid(self, field, value):
        with pytest.raises(ConfigError):
            ExperimentConfig(**{field: value})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_paths_relative_to_config(self):
        cfg = load_config(FIXTURES / "calibration_csv.ini")
        assert Path(cfg.calibration).is_absolute() and Path(cfg.calibration).exists()

    def test_bit_rate_overrides_slot(self):
        assert ExperimentConfig(bit_rate=15.0).effective_slot == pytest.approx(1 / 15)
        assert ExperimentConfig(bit_rate=15.0, modulation="manchester").effective_slot == pytest.approx(1 / 30)

    def test_echo_names_every_field(self):
        echo = ExperimentConfig().echo()
        assert echo["receiver.kind"] == "photodiode"
        assert echo["modulation.slot_time"] == "0.00018"
        assert len(echo) == len(ExperimentConfig.__dataclass_fields__)


class TestPayload:
    def test_hex(self):
        cfg = ExperimentConfig(payload_source="hex", payload_hex="a5")
        assert harness.payload_bits(cfg).tolist() == [1, 0, 1, 0, 0, 1, 0, 1]

    def test_random_reproducible(self):
        a, b = harness.payload_bits(SMALL), harness.payload_bits(SMALL)
        assert np.array_equal(a, b) and a.size == 512

    def test_empty_file(self):
        cfg = load_config(FIXTURES / "empty_payload.ini")
        with pytest.raises(ConfigError):
            run_link(cfg)

    def test_bad_hex(self):
        with pytest.raises(ConfigError):
            harness.payload_bits(ExperimentConfig(payload_source="hex", payload_hex="xyz"))


class TestRunLink:
    def test_peak_link(self):
        rep = run_link(ExperimentConfig())
        assert rep.ber == 0.0
        assert rep.frames_ok == rep.frames_sent == 16
        assert rep.channel_rate >= 4000

    def test_webcam_15_bits(self):
        rep = run_link(load_config(FIXTURES / "rx_webcam.ini"))
        assert rep.ber == 0.0

    def test_repetitions_pool(self):
        rep = run_link(replace(SMALL, repetitions=3))
        assert rep.frames_sent == rep.frames_ok == 6
        assert rep.bits_sent == 3 * 512 and rep.ber == 0.0

    def test_report_and_trace_written(self, tmp_path):
        cfg = replace(SMALL, report=str(tmp_path / "r.csv"), trace_out=str(tmp_path / "t.csv"))
        run_link(cfg)
        rows = read_rows(tmp_path / "r.csv")
        assert len(rows) == 1 and rows[0]["ber"] == "0.0"
        assert (tmp_path / "t.csv").read_text().startswith("t_seconds,intensity_volts\n")

    def test_reproducible_bytes(self, tmp_path):
        cfg = replace(load_config(FIXTURES / "jammer.ini"), payload_bits=512, noise_sigma=0.5, phase=-1.0)
        cfg = replace(cfg, report=str(tmp_path / "r.csv"))
        run_link(cfg)
        first = (tmp_path / "r.csv").read_bytes()
        run_link(load_config_again(cfg))
        assert (tmp_path / "r.csv").read_bytes() == first

    def test_simulate_exposes_stages(self):
        run = simulate(SMALL)
        assert len(run.frames) == 2
        assert run.schedule.duration(harness.calibration(SMALL)) == pytest.approx(run.emitted.duration)
        assert len(run.trace) > 0

    def test_out_of_calibration_slot(self):
        with pytest.raises(ConfigError):
            simulate(ExperimentConfig(slot_time=0.1e-3))


FIXTURE_FILES = sorted(p.name for p in FIXTURES.glob("*.ini") if p.name not in ("empty_payload.ini", "jammer.ini"))


class TestFixtures:
    @pytest.mark.parametrize("name", FIXTURE_FILES)
    def test_decodes_cleanly(self, name):
        rep = run_link(load_config(FIXTURES / name))
        assert rep.ber == 0.0, name

    def test_jammer_fixture_degrades(self):
        rep = run_link(load_config(FIXTURES / "jammer.ini"))
        assert rep.ber > 0.1

    @pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.glob("*.ini")))
    def test_first_line_is_comment(self, name):
        assert (FIXTURES / name).read_text().startswith("#")


class TestSweep:
    def test_header_and_order(self, tmp_path):
        out = tmp_path / "s.csv"
        rows = sweep(SMALL, "receiver.noise_sigma", [0.0, 3.0, 1.0], out=out)
        header = out.read_text().splitlines()[0].split(",")
        assert header[:5] == REPORT_HEADER
        assert [r["axis_value"] for r in rows] == ["0.0", "3.0", "1.0"]
        assert [r["receiver.noise_sigma"] for r in read_rows(out)] == ["0.0", "3.0", "1.0"]

    def test_parallel_matches_serial(self):
        a = sweep(SMALL, "noise_sigma", [0.0, 4.0], workers=1)
        b = sweep(SMALL, "noise_sigma", [0.0, 4.0], workers=2)
        assert a == b

    @pytest.mark.parametrize("axis", ["receiver.colour", "modulation.kind", "led.color"])
    def test_invalid_axis(self, axis):
        with pytest.raises(InvalidAxis):
            sweep(SMALL, axis, [1.0])

    def test_empty_values(self):
        with pytest.raises(InvalidAxis):
            sweep(SMALL, "noise_sigma", [])

    def test_camera_bit_rate(self):
        # a full key spans several beats between the 29.97 fps clock and the bit clock
        cfg = replace(load_config(FIXTURES / "rx_webcam.ini"), payload_bits=4096)
        rows = sweep(cfg, "bit_rate", [15, 30, 60])
        bers = [float(r["ber"]) for r in rows]
        assert bers[0] == 0.0
        assert all(b > 0.1 for b in bers[1:])

    def test_distance_amplitude(self):
        rows = sweep(replace(SMALL, ambient=0.05), "channel.distance", [1.0, 3.0, 4.0, 5.0])
        swing = [float(r["swing_volts"]) for r in rows]
        assert all(b <= a for a, b in zip(swing, swing[1:]))
        assert swing[1] == pytest.approx(5.3 / 9, rel=0.01)

    def test_noise_monotone(self):
        sigmas = [0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0]
        rows = sweep(replace(SMALL, payload_bits=1024), "noise_sigma", sigmas)
        bers = [float(r["ber"]) for r in rows]
        assert bers[0] == 0.0
        assert all(b >= a for a, b in zip(bers, bers[1:])), bers


class TestReadmeConfig:
    def test_annotated_example_parses_to_defaults(self):
        readme = (Path(__file__).parents[1] / "README.md").read_text()
        block = readme.split("```ini\n", 1)[1].split("```", 1)[0]
        assert ExperimentConfig.from_ini(block) == ExperimentConfig()
