import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hddled.calibration import LedCalibration
from hddled.demod import LinkReport, decode_link, estimate_levels, estimate_threshold, find_sync
from hddled.errors import DegenerateTrace, SyncNotFound
from hddled.framing import FIXED, VARIABLE, encode_frame
from hddled.linecode import ModulationScheme, modulate_frames
from hddled.rxmodel import ChannelConfig, ReceiverModel, SampledTrace, apply_channel, sample
from hddled.txmodel import Waveform, transmit

RED = LedCalibration.for_color("red")


def random_payloads(n, framing, rng, max_bits=600):
    if framing is FIXED:
        return [rng.integers(0, 2, 256).astype(np.uint8) for _ in range(n)]
    return [rng.integers(0, 2, int(rng.integers(1, max_bits))).astype(np.uint8) for _ in range(n)]


def link(payloads, scheme, framing, rx, seed=0, calib=RED, channel=None, frames=None, tx_scheme=None):
    frames = frames if frames is not None else [encode_frame(p, framing) for p in payloads]
    _, w = transmit(modulate_frames(frames, tx_scheme or scheme, calib), calib)
    if channel is not None:
        w = apply_channel(w, channel)
    trace = sample(w, rx, seed)
    return trace, decode_link(trace, scheme, framing, np.concatenate(payloads), calib)


class TestThreshold:
    def test_square_midpoint(self):
        tr = SampledTrace(200e3, np.tile([0.0] * 36 + [5.3] * 36, 20))
        assert estimate_threshold(tr) == pytest.approx(2.65)

    def test_all_zero_degenerate(self):
        with pytest.raises(DegenerateTrace):
            estimate_threshold(SampledTrace(200e3, np.zeros(1000)))

    def test_pure_noise_degenerate(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DegenerateTrace):
            estimate_threshold(SampledTrace(200e3, rng.normal(0, 0.1, 10_000)))

    @pytest.mark.parametrize("seed", range(20))
    def test_blue_with_noise(self, seed):
        clean = np.tile([0.0] * 36 + [0.71] * 36, 50)
        noisy = clean + np.random.default_rng(seed).normal(0, 0.05, clean.size)
        assert estimate_threshold(SampledTrace(200e3, noisy)) == pytest.approx(0.355, abs=0.05)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 10.0), st.floats(0.0, 2.0), st.integers(0, 1000))
    def test_separates_levels_at_snr_3(self, amp, ambient, seed):
        sigma = amp / 3
        clean = np.tile([0.0] * 20 + [amp] * 20, 50) + ambient
        noisy = clean + np.random.default_rng(seed).normal(0, sigma, clean.size)
        th = estimate_threshold(SampledTrace(200e3, noisy))
        assert ambient < th < ambient + amp

    def test_empty(self):
        with pytest.raises(DegenerateTrace):
            estimate_levels([])


class TestFindSync:
    @pytest.mark.parametrize("kind", ["ook", "manchester"])
    @pytest.mark.parametrize("samples_per_slot", [8, 20, 36])
    def test_period_noiseless(self, kind, samples_per_slot):
        slot = 1e-3
        scheme = getattr(ModulationScheme, kind)(slot)
        rng = np.random.default_rng(1)
        frames = [encode_frame(p, FIXED) for p in random_payloads(1, FIXED, rng)]
        _, w = transmit(modulate_frames(frames, scheme, RED), RED)
        tr = sample(w, ReceiverModel.photodiode(samples_per_slot / slot))
        est = find_sync(tr, scheme, RED)
        assert est.bit_period == pytest.approx(scheme.bit_period(RED), rel=0.02)
        assert est.confidence >= 0.9
        assert 0 <= est.frame_start < len(tr)

    @pytest.mark.parametrize("skew", [0.9, 1.1])
    def test_clock_skew(self, skew):
        nominal = ModulationScheme.ook(1e-3)
        actual = ModulationScheme.ook(1e-3 * skew)
        frames = [encode_frame(np.ones(256, np.uint8), FIXED)]
        _, w = transmit(modulate_frames(frames, actual, RED), RED)
        tr = sample(w, ReceiverModel.photodiode(20e3))
        est = find_sync(tr, nominal, RED)
        assert est.bit_period == pytest.approx(1e-3 * skew, rel=0.02)

    def test_frame_start_at_preamble(self):
        scheme = ModulationScheme.ook(1e-3)
        frames = [encode_frame(np.tile([1, 1, 0], 86)[:256].astype(np.uint8), FIXED)]
        _, w = transmit(modulate_frames(frames, scheme, RED), RED)
        tr = sample(w, ReceiverModel.photodiode(20e3))
        est = find_sync(tr, scheme, RED)
        # the frame follows a 4-bit idle gap
        assert est.start_time == pytest.approx(4e-3, abs=0.25e-3)

    @pytest.mark.parametrize("seed", range(5))
    def test_pure_noise(self, seed):
        tr = SampledTrace(200e3, np.random.default_rng(seed).normal(0, 1, 100_000))
        with pytest.raises(SyncNotFound):
            find_sync(tr, ModulationScheme.ook(0.18e-3), RED)

    def test_random_telegraph_accepts_no_frames(self):
        rng = np.random.default_rng(0)
        samples = np.repeat(rng.integers(0, 2, 20_000) * 5.3, 36)
        tr = SampledTrace(200e3, samples)
        payloads, rep = decode_link(tr, ModulationScheme.ook(0.18e-3), FIXED, None, RED)
        assert rep.frames_ok == 0 and payloads == []


class TestDecodeLink:
    def test_key_sixteen_frames(self):
        rng = np.random.default_rng(42)
        pays = random_payloads(16, FIXED, rng)
        _, (out, rep) = link(pays, ModulationScheme.ook(0.18e-3), FIXED, ReceiverModel.photodiode(200e3))
        assert rep.frames_ok == 16 and rep.frames_detected == 16
        assert rep.ber == 0.0
        assert all(np.array_equal(a, b) for a, b in zip(out, pays))

    def test_one_flipped_bit(self):
        rng = np.random.default_rng(42)
        pays = random_payloads(16, FIXED, rng)
        frames = [encode_frame(p, FIXED) for p in pays]
        frames[5] = frames[5].copy()
        frames[5][8 + 100] ^= 1
        _, (out, rep) = link(pays, ModulationScheme.ook(0.18e-3), FIXED, ReceiverModel.photodiode(200e3),
                             frames=frames)
        assert rep.frames_crc_failed == 1
        assert rep.frames_ok == 15
        assert len(out) == 15

    @pytest.mark.parametrize("phase", [0.0, 0.3, 0.5, 0.77])
    def test_camera_15_bits(self, phase):
        rng = np.random.default_rng(3)
        pays = random_payloads(2, FIXED, rng)
        _, (_, rep) = link(pays, ModulationScheme.ook(1 / 15), FIXED, ReceiverModel.camera(30.0, phase=phase))
        assert rep.frames_ok == 2
        assert rep.ber == 0.0

    @pytest.mark.parametrize("kind", ["ook", "manchester", "bfsk"])
    @pytest.mark.parametrize("framing", [FIXED, VARIABLE], ids=["fixed", "variable"])
    def test_identity_photodiode(self, kind, framing):
        scheme = ModulationScheme.bfsk() if kind == "bfsk" else getattr(ModulationScheme, kind)(0.18e-3)
        rate = 8 / scheme.shortest_feature(RED)
        rng = np.random.default_rng(11)
        pays = random_payloads(6, framing, rng)
        _, (out, rep) = link(pays, scheme, framing, ReceiverModel.photodiode(rate, phase=None), seed=7)
        assert rep.ber == 0.0 and rep.frames_ok == 6
        assert all(np.array_equal(a, b) for a, b in zip(out, pays))

    @pytest.mark.parametrize("kind", ["ook", "manchester"])
    @pytest.mark.parametrize("framing", [FIXED, VARIABLE], ids=["fixed", "variable"])
    def test_identity_camera_two_frames_per_slot(self, kind, framing):
        scheme = getattr(ModulationScheme, kind)(1 / 15)
        rng = np.random.default_rng(12)
        pays = random_payloads(2, framing, rng, max_bits=80)
        _, (_, rep) = link(pays, scheme, framing, ReceiverModel.camera(30.0, phase=None), seed=3)
        assert rep.ber == 0.0 and rep.frames_ok == 2

    def test_ber_counts_missing_frames(self):
        rng = np.random.default_rng(1)
        pays = random_payloads(2, FIXED, rng)
        frames = [encode_frame(p, FIXED) for p in pays]
        frames[1] = frames[1].copy()
        frames[1][3] ^= 1  # broken preamble: frame never detected
        _, (_, rep) = link(pays, ModulationScheme.ook(1e-3), FIXED, ReceiverModel.photodiode(20e3),
                           frames=frames)
        assert rep.frames_ok == 1
        # the 256 bits of the lost frame are all counted as errors
        assert rep.bit_errors == 0
        assert rep.ber == pytest.approx(0.5)

    def test_report_invariants(self):
        rng = np.random.default_rng(5)
        pays = random_payloads(4, VARIABLE, rng)
        _, (_, rep) = link(pays, ModulationScheme.ook(1e-3), VARIABLE, ReceiverModel.photodiode(20e3, 2.0),
                           channel=ChannelConfig(edge_jitter_sigma=0.1e-3, rng_seed=5))
        assert rep.frames_ok + rep.frames_crc_failed <= rep.frames_detected
        assert 0 <= rep.ber <= 1

    def test_truncated_trace_does_not_raise(self):
        rng = np.random.default_rng(2)
        pays = random_payloads(2, FIXED, rng)
        tr, _ = link(pays, ModulationScheme.ook(1e-3), FIXED, ReceiverModel.photodiode(20e3))
        half = SampledTrace(tr.rate, tr.samples[: len(tr) * 3 // 4], tr.t0)
        _, rep = decode_link(half, ModulationScheme.ook(1e-3), FIXED, np.concatenate(pays), RED)
        assert rep.frames_ok == 1
        assert rep.ber > 0

    def test_empty_report(self):
        rep = LinkReport()
        assert rep.fer is None and rep.ber is None


class TestDegradation:
    def test_ber_monotone_in_noise(self):
        rng = np.random.default_rng(8)
        pays = random_payloads(8, FIXED, rng)
        scheme = ModulationScheme.ook(0.18e-3)
        frames = [encode_frame(p, FIXED) for p in pays]
        _, w = transmit(modulate_frames(frames, scheme, RED), RED)
        bers = []
        for sigma in [0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0]:
            tr = sample(w, ReceiverModel.photodiode(200e3, noise_sigma=sigma), seed=1)
            _, rep = decode_link(tr, scheme, FIXED, np.concatenate(pays), RED)
            bers.append(rep.ber)
        assert bers[0] == 0.0
        assert bers[-1] > 0.1
        assert all(b >= a for a, b in zip(bers, bers[1:])), bers


class TestNoFalseFrames:
    def test_pure_noise_million_samples_hundred_seeds(self):
        accepted = 0
        for seed in range(100):
            tr = SampledTrace(200e3, np.random.default_rng(seed).normal(0, 1.0, 1_000_000))
            payloads, rep = decode_link(tr, ModulationScheme.ook(0.18e-3), FIXED, None, RED)
            accepted += rep.frames_ok
        assert accepted / 100 < 1

    @pytest.mark.parametrize("kind", ["ook", "manchester", "bfsk"])
    @pytest.mark.parametrize("framing", [FIXED, VARIABLE], ids=["fixed", "variable"])
    def test_random_bursts(self, kind, framing):
        scheme = ModulationScheme.bfsk() if kind == "bfsk" else getattr(ModulationScheme, kind)(0.18e-3)
        rate = 8 / scheme.shortest_feature(RED)
        rng = np.random.default_rng(21)
        # random ON/OFF bursts with the scheme's own time scale and noise on top
        durations = rng.choice([1, 2, 3], 4000) * scheme.shortest_feature(RED)
        w = Waveform.from_durations(durations, np.tile([5.3, 0.0], 2000))
        tr = sample(w, ReceiverModel.photodiode(rate, noise_sigma=0.5), seed=2)
        _, rep = decode_link(tr, scheme, framing, None, RED)
        assert rep.frames_ok == 0
