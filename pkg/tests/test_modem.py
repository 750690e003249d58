import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrfol.modem import (DEFAULT_PREAMBLE, WAVEFORM_MAGIC, BitStream, ConfigError, EmptyPayloadError,
                         InsufficientDataError, ModemConfig, Scheme, SyncError, Waveform, bit_synchronize,
                         coherent_demodulate, invert_bpsk_ber, modulate, nrz_decode, nrz_encode, receive,
                         symbol_decide, sync_metric, theoretical_ber)
from qrfol.rng import ChannelSeed, random_bits, standard_normal

SCHEMES = list(Scheme)


def payload(n, stream=0):
    return random_bits(ChannelSeed(123, stream), n)


class TestNrz:
    def test_definition(self):
        np.testing.assert_array_equal(nrz_encode([1, 0, 1, 1]), [1, -1, 1, 1])

    def test_all_zero(self):
        np.testing.assert_array_equal(nrz_encode(np.zeros(9, int)), -np.ones(9))

    def test_round_trip(self):
        b = payload(10_000)
        np.testing.assert_array_equal(nrz_decode(nrz_encode(b)), b)

    def test_empty(self):
        with pytest.raises(EmptyPayloadError):
            nrz_encode([])

    def test_bitstream(self):
        bs = BitStream([1, 0, 1], 20e6)
        np.testing.assert_array_equal(nrz_encode(bs), [1, -1, 1])
        with pytest.raises(ValueError):
            BitStream([2])


class TestConfig:
    def test_defaults(self):
        cfg = ModemConfig()
        assert cfg.samples_per_bit == 20
        assert len(cfg.preamble) == 64
        assert cfg.preamble == DEFAULT_PREAMBLE

    @pytest.mark.parametrize("kwargs,path", [
        (dict(sample_rate=250e6), "modem.sample_rate"),
        (dict(bit_rate=30e6), "modem.sample_rate"),
        (dict(carrier_hz=70e6), "modem.carrier_hz"),
        (dict(scheme="bfsk", mark_hz=55e6), "modem.mark_hz"),
        (dict(scheme="bfsk", space_hz=13e6), "modem.space_hz"),
        (dict(preamble=(0, 2)), "modem.preamble"),
    ])
    def test_invalid(self, kwargs, path):
        with pytest.raises(ConfigError) as exc:
            ModemConfig(**kwargs)
        assert exc.value.field_path == path


class TestModulate:
    def test_bpsk_phase_flip(self):
        # 40 MHz at 20 Mb/s: two whole carrier cycles per bit
        cfg = ModemConfig(carrier_hz=40e6)
        w = modulate([1, 0], cfg).samples[cfg.preamble_samples:]
        ns = cfg.samples_per_bit
        np.testing.assert_allclose(w[ns:], -w[:ns], atol=1e-12)

    def test_bask_zero_segment(self):
        cfg = ModemConfig(scheme="bask")
        w = modulate([1, 0, 1], cfg).samples[cfg.preamble_samples:]
        ns = cfg.samples_per_bit
        assert np.all(w[ns:2 * ns] == 0)
        assert np.any(w[:ns] != 0)

    def test_bpsk_power(self):
        cfg = ModemConfig(amplitude=0.7)
        w = modulate(payload(5000), cfg)  # 1e5 payload samples
        seg = w.samples[cfg.preamble_samples:]
        assert np.mean(seg ** 2) == pytest.approx(0.7 ** 2 / 2, rel=0.01)

    @pytest.mark.parametrize("scheme", [Scheme.BPSK, Scheme.BASK])
    def test_linearity(self, scheme):
        b = payload(300)
        w1 = modulate(b, ModemConfig(scheme=scheme, amplitude=1.0)).samples
        w2 = modulate(b, ModemConfig(scheme=scheme, amplitude=2.0)).samples
        np.testing.assert_array_equal(w2, 2 * w1)

    def test_bfsk_phase_continuity(self):
        cfg = ModemConfig(scheme="bfsk")
        # start at the last preamble sample so the preamble/payload junction counts too
        w = modulate(payload(2000), cfg).samples[cfg.preamble_samples - 1:]
        ns = cfg.samples_per_bit
        jumps = np.abs(np.diff(w))
        boundary = np.zeros(jumps.size, bool)
        boundary[0::ns] = True
        assert jumps[boundary].max() <= jumps[~boundary].max() + 1e-12

    def test_frame_length(self):
        cfg = ModemConfig()
        assert len(modulate(payload(10), cfg)) == cfg.frame_samples(10) == (64 + 10) * 20

    def test_empty(self):
        with pytest.raises(EmptyPayloadError):
            modulate([], ModemConfig())


class TestDemodulate:
    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_noiseless_loopback(self, scheme):
        cfg = ModemConfig(scheme=scheme, amplitude=0.3)
        b = payload(10_000, stream=1)
        w = modulate(b, cfg)
        assert bit_synchronize(w, cfg) == 0
        np.testing.assert_array_equal(receive(w, cfg), b)

    @given(st.sampled_from(SCHEMES), st.lists(st.integers(0, 1), min_size=1, max_size=200))
    @settings(max_examples=30, deadline=None)
    def test_loopback_property(self, scheme, bits):
        cfg = ModemConfig(scheme=scheme)
        w = modulate(bits, cfg)
        np.testing.assert_array_equal(receive(w, cfg, len(bits)), bits)

    def test_correlator_gain(self):
        cfg = ModemConfig(amplitude=0.5)
        ns = cfg.samples_per_bit
        soft = coherent_demodulate(modulate([1], cfg), cfg)
        # oracle: direct sum of A*cos^2 over the slot
        n = np.arange(cfg.preamble_samples, cfg.preamble_samples + ns)
        exact = 0.5 * np.sum(np.cos(2 * np.pi * cfg.carrier_hz * n / cfg.sample_rate) ** 2)
        assert soft[0] == pytest.approx(exact, rel=1e-12)
        assert soft[0] == pytest.approx(0.5 * ns / 2, rel=0.05)

    def test_zero_waveform(self):
        cfg = ModemConfig()
        soft = coherent_demodulate(Waveform(np.zeros(cfg.frame_samples(7)), cfg.sample_rate), cfg)
        np.testing.assert_array_equal(soft, np.zeros(7))

    def test_too_short(self):
        cfg = ModemConfig()
        with pytest.raises(InsufficientDataError):
            coherent_demodulate(Waveform(np.zeros(cfg.preamble_samples + 5), cfg.sample_rate), cfg)

    def test_rate_mismatch(self):
        with pytest.raises(ValueError):
            coherent_demodulate(Waveform(np.zeros(5000), 100e6), ModemConfig())


class TestSync:
    def test_delay_at_10db(self):
        cfg = ModemConfig()
        w = modulate(payload(500), cfg).samples
        k = 137
        sig_power = cfg.amplitude ** 2 / 2
        noise_var = sig_power / 10.0
        x = np.concatenate([np.zeros(k), w])
        x = x + math.sqrt(noise_var) * standard_normal(ChannelSeed(5, 0), 0, x.size)
        assert bit_synchronize(Waveform(x, cfg.sample_rate), cfg) == k

    def test_pure_noise_fails(self):
        cfg = ModemConfig()
        x = standard_normal(ChannelSeed(5, 1), 0, 20_000)
        with pytest.raises(SyncError):
            bit_synchronize(Waveform(x, cfg.sample_rate), cfg)

    def test_metric_peaks_at_one(self):
        cfg = ModemConfig(scheme="bask", amplitude=3.0)
        m = sync_metric(modulate(payload(200), cfg), cfg)
        assert m[0] == pytest.approx(1.0, abs=2e-3)
        assert m.argmax() == 0


class TestDecide:
    def test_sign_rule(self):
        np.testing.assert_array_equal(symbol_decide([0.3, -0.2, 0.0]), [1, 0, 1])

    def test_bask_threshold(self):
        cfg = ModemConfig(scheme="bask", amplitude=2.0)
        t = cfg.bask_threshold
        assert t == 2.0 * 20 / 4
        np.testing.assert_array_equal(symbol_decide([t - 1e-9, t, t + 1], cfg), [0, 1, 1])

    def test_empty(self):
        with pytest.raises(EmptyPayloadError):
            symbol_decide([])


class TestTheory:
    def test_zero(self):
        for s in SCHEMES:
            assert theoretical_ber(s, 0.0) == 0.5

    def test_bpsk_0db(self):
        assert theoretical_ber("bpsk", 1.0) == pytest.approx(0.5 * math.erfc(1.0), rel=1e-14)
        assert theoretical_ber("bpsk", 1.0) == pytest.approx(0.07865, abs=1e-5)

    def test_ordering_at_4(self):
        assert theoretical_ber("bpsk", 4) < theoretical_ber("bfsk", 4) < theoretical_ber("bask", 4)

    @given(st.floats(1e-6, 100))
    def test_ordering(self, g):
        assert theoretical_ber("bpsk", g) < theoretical_ber("bfsk", g) < theoretical_ber("bask", g)

    @given(st.sampled_from(SCHEMES), st.floats(0, 50), st.floats(1e-3, 5))
    def test_decreasing(self, s, g, dg):
        assert theoretical_ber(s, g + dg) < theoretical_ber(s, g)

    def test_negative(self):
        with pytest.raises(ValueError):
            theoretical_ber("bpsk", -1)

    @given(st.floats(1e-6, 0.49))
    def test_inverse(self, p):
        assert theoretical_ber("bpsk", invert_bpsk_ber(p)) == pytest.approx(p, rel=1e-9)


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("gamma", [2, 4, 8])
def test_monte_carlo_matches_theory(scheme, gamma):
    """Per-bit matched-filter statistics with white per-sample noise."""
    cfg = ModemConfig(scheme=scheme)
    ns = cfg.samples_per_bit
    sigma2 = 1.0
    amp = math.sqrt(4 * sigma2 * gamma / ns)
    cfg = cfg.with_amplitude(amp)
    n = 100_000
    b = random_bits(ChannelSeed(99, gamma), n)
    w = modulate(b, cfg).samples
    w = w + standard_normal(ChannelSeed(99, 100 + gamma + 10 * SCHEMES.index(scheme)), 0, w.size)
    decided = symbol_decide(coherent_demodulate(Waveform(w, cfg.sample_rate), cfg, 0, n), cfg)
    ber = np.mean(decided != b)
    p = theoretical_ber(scheme, gamma)
    assert abs(ber - p) <= 3 * math.sqrt(p * (1 - p) / n)


class TestWaveformIO:
    def test_csv_round_trip(self, tmp_path):
        w = Waveform(np.array([0.0, -1.5, 1e-300, 3.25]), 400e6)
        path = tmp_path / "w.csv"
        w.save(path)
        assert path.read_text().splitlines()[0] == "sample_index,amplitude"
        back = Waveform.load(path, sample_rate=400e6)
        np.testing.assert_array_equal(back.samples, w.samples)

    def test_binary_layout(self, tmp_path):
        w = Waveform(np.array([1.0, -2.0]), 400e6)
        data = w.to_bytes()
        assert data[:8] == WAVEFORM_MAGIC == b"QRFOLWF1"
        assert np.frombuffer(data[8:16], "<f8")[0] == 400e6
        assert len(data) == 16 + 16
        path = tmp_path / "w.bin"
        w.save(path)
        back = Waveform.load(path)
        assert back.sample_rate == 400e6
        np.testing.assert_array_equal(back.samples, w.samples)

    @pytest.mark.parametrize("data", [b"QRFOLWF2" + bytes(8), b"QRFOLWF1" + bytes(11), b"xx"])
    def test_binary_errors(self, data):
        with pytest.raises(ValueError):
            Waveform.from_bytes(data)

    def test_nonfinite(self):
        with pytest.raises(ValueError):
            Waveform(np.array([np.nan]), 1.0)
