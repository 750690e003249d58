import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrfol.optics import (Baseline, CapacityQuery, ChannelScenario, EprParams, Interpolation, Scenario,
                          SqueezingSpectrum, channel_capacity, dump_spectrum_csv, epr_correlation_variances,
                          load_spectrum_csv, r_to_db, scenario_snr, squeeze_db_to_r, squeezing_at_frequency,
                          thermal_submode_variance, SQUEEZER1_ANCHORS)

ENTANGLED = ChannelScenario(Scenario.ENTANGLED_JOINT)
CLASSICAL = ChannelScenario(Scenario.COHERENT_CLASSICAL)
THERMAL = ChannelScenario(Scenario.THERMAL_SINGLE)


def beam_splitter_variances(r1, r2):
    """Brute force: squeeze two vacua, rotate b by pi/2, mix on a 50/50 splitter,
    then read variances of the sum/difference combinations off the covariance."""
    # ordering (xa, ya, xb, yb); both inputs amplitude-squeezed
    cov = np.diag([math.exp(-2 * r1), math.exp(2 * r1), math.exp(-2 * r2), math.exp(2 * r2)])
    rot = np.eye(4)
    rot[2:, 2:] = [[0.0, -1.0], [1.0, 0.0]]  # b -> i*b
    s = 1 / math.sqrt(2)
    bs = np.array([[s, 0, s, 0], [0, s, 0, s], [s, 0, -s, 0], [0, s, 0, -s]])  # (x1,y1,x2,y2)
    m = bs @ rot
    out = m @ cov @ m.T

    def var(c):
        c = np.asarray(c, float)
        return float(c @ out @ c)

    return dict(sum_x=var([1, 0, 1, 0]), diff_x=var([1, 0, -1, 0]),
                sum_y=var([0, 1, 0, 1]), diff_y=var([0, 1, 0, -1]))


class TestSqueezeConversion:
    def test_zero_db(self):
        assert squeeze_db_to_r(0.0) == 0.0

    def test_7_5_db(self):
        r = squeeze_db_to_r(7.5)
        assert r == pytest.approx(0.86347, abs=5e-6)
        assert 10 * math.log10(math.exp(2 * r)) == pytest.approx(7.5, rel=1e-12)

    def test_quarter_variance(self):
        db = 20 * math.log10(2)  # 6.0206 dB
        assert squeeze_db_to_r(db) == pytest.approx(math.log(4) / 2, rel=1e-12)
        assert math.exp(-2 * squeeze_db_to_r(db)) == pytest.approx(0.25, rel=1e-12)

    @pytest.mark.parametrize("bad", [-0.1, math.nan, math.inf])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(ValueError):
            squeeze_db_to_r(bad)
        with pytest.raises(ValueError):
            r_to_db(bad)

    @given(st.floats(0, 20))
    def test_round_trip(self, db):
        assert r_to_db(squeeze_db_to_r(db)) == pytest.approx(db, rel=1e-12, abs=1e-15)

    @given(st.floats(0, 20))
    def test_from_db(self, db):
        assert r_to_db(EprParams.from_db(db).r) == pytest.approx(db, rel=1e-12, abs=1e-15)


class TestEprVariances:
    def test_vacuum(self):
        v = epr_correlation_variances(EprParams(0.0))
        assert (v.sum_x, v.diff_x, v.sum_y, v.diff_y) == (2.0, 2.0, 2.0, 2.0)

    def test_7_5_db(self):
        v = epr_correlation_variances(EprParams(0.86347))
        assert v.sum_x == pytest.approx(0.35566, abs=5e-5)
        assert v.diff_x == pytest.approx(11.2468, abs=5e-4)
        assert v.sum_x * v.diff_x == pytest.approx(4.0, rel=1e-12)

    def test_unequal_matches_beam_splitter(self):
        r1 = squeeze_db_to_r(7.5)
        v = epr_correlation_variances(EprParams(r1=r1, r2=0.0))
        # Frozen from the beam-splitter brute force: 2 * 10^-0.75.
        assert v.sum_x == pytest.approx(0.35565588200778456, rel=1e-12)
        assert v.diff_y == pytest.approx(2.0, rel=1e-12)

    @given(st.floats(0, 3), st.floats(0, 3))
    def test_brute_force_agreement(self, r1, r2):
        v = epr_correlation_variances(EprParams(r1=r1, r2=r2))
        ref = beam_splitter_variances(r1, r2)
        for key, value in ref.items():
            assert getattr(v, key) == pytest.approx(value, rel=1e-9)

    @given(st.floats(0, 3))
    def test_pure_state_product(self, r):
        v = epr_correlation_variances(EprParams(r))
        assert v.sum_x * v.diff_x == pytest.approx(4.0, rel=1e-12)
        assert v.sum_x == v.diff_y and v.diff_x == v.sum_y

    @given(st.floats(0, 3), st.floats(0, 3))
    def test_heisenberg_bound(self, r1, r2):
        v = epr_correlation_variances(EprParams(r1=r1, r2=r2))
        assert v.sum_x * v.sum_y >= 4.0 * (1 - 1e-12)
        assert v.diff_x * v.diff_y >= 4.0 * (1 - 1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            EprParams(-0.1)
        with pytest.raises(ValueError):
            EprParams(r1=-1.0)


class TestThermal:
    @pytest.mark.parametrize("r,expected", [
        (0.0, 1.0),
        (0.86347, (10 ** 0.75 + 10 ** -0.75) / 2),
        (1.0, (math.e ** 2 + math.e ** -2) / 2),
    ])
    def test_examples(self, r, expected):
        got = thermal_submode_variance(EprParams(r))
        assert got == pytest.approx(expected, rel=1e-5 if r == 0.86347 else 1e-12)

    def test_values(self):
        assert thermal_submode_variance(EprParams(0.86347)) == pytest.approx(2.9006, abs=5e-4)
        assert thermal_submode_variance(EprParams(1.0)) == pytest.approx(3.7622, abs=5e-5)

    @given(st.floats(0, 3), st.floats(1e-3, 1))
    def test_increasing(self, r, dr):
        assert thermal_submode_variance(EprParams(r + dr)) > thermal_submode_variance(EprParams(r))

    def test_unequal_matches_single_mode_of_brute_force(self):
        r1, r2 = 0.8, 0.3
        # x2 = (xa + yb)/sqrt2 after the splitter
        expected = 0.5 * (math.exp(-2 * r1) + math.exp(2 * r2))
        assert thermal_submode_variance(EprParams(r1=r1, r2=r2), "x") == pytest.approx(expected)


class TestScenarioSnr:
    def test_classical(self):
        assert scenario_snr(2.0, EprParams(0.9), CLASSICAL) == 1.0

    def test_single_mode_baseline(self):
        assert scenario_snr(2.0, EprParams(0.9), ChannelScenario(Scenario.COHERENT_CLASSICAL,
                                                                  Baseline.SINGLE_MODE)) == 2.0

    def test_entangled(self):
        assert scenario_snr(1.0, EprParams(math.log(4) / 2), ENTANGLED) == pytest.approx(2.0, rel=1e-12)

    @given(st.floats(1e-6, 1e6), st.floats(0, 3))
    def test_gain_is_exp_2r(self, s, r):
        p = EprParams(r)
        ratio = scenario_snr(s, p, ENTANGLED) / scenario_snr(s, p, CLASSICAL)
        assert ratio == pytest.approx(math.exp(2 * r), rel=1e-12)

    @given(st.floats(0, 1e6))
    def test_vacuum_collapse(self, s):
        p = EprParams(0.0)
        assert scenario_snr(s, p, ENTANGLED) == scenario_snr(s, p, CLASSICAL)
        assert scenario_snr(s, p, THERMAL) == pytest.approx(s, rel=1e-15)

    def test_measured_gain_consistency(self):
        # r for 5.7 dB gives exactly a 5.7 dB joint-detection gain over classical.
        p = EprParams.from_db(5.7)
        ratio = scenario_snr(1.0, p, ENTANGLED) / scenario_snr(1.0, p, CLASSICAL)
        assert 10 * math.log10(ratio) == pytest.approx(5.7, rel=1e-12)

    def test_negative_signal(self):
        with pytest.raises(ValueError):
            scenario_snr(-1.0, EprParams(), CLASSICAL)

    def test_scenario_parse(self):
        assert Scenario.parse("EPR") is Scenario.ENTANGLED_JOINT
        with pytest.raises(ValueError):
            Scenario.parse("quantum")


class TestCapacity:
    def test_examples(self):
        assert channel_capacity(CapacityQuery(1.0, 1.0)) == 1.0
        assert channel_capacity(CapacityQuery(123.0, 0.0)) == 0.0
        assert channel_capacity(CapacityQuery(40e6, 3.0)) == 80e6

    def test_slope_at_one(self):
        h = 1e-6
        slope = (math.log2(2 + h) - math.log2(2 - h)) / (2 * h)
        fd = (channel_capacity(CapacityQuery(1, 1 + h)) - channel_capacity(CapacityQuery(1, 1 - h))) / (2 * h)
        assert fd == pytest.approx(1 / (2 * math.log(2)), abs=1e-6)
        assert slope == pytest.approx(fd, abs=1e-6)

    @given(st.floats(1, 1e9), st.floats(0, 1e4), st.floats(0, 1e4))
    def test_concave_monotone(self, b, s1, s2):
        c = lambda s: channel_capacity(CapacityQuery(b, s))
        lo, hi = sorted((s1, s2))
        assert c(lo) <= c(hi)
        assert c(0.5 * (s1 + s2)) >= 0.5 * (c(s1) + c(s2)) * (1 - 1e-12)

    @pytest.mark.parametrize("b,s", [(0, 1), (-1, 1), (1, -0.1)])
    def test_invalid(self, b, s):
        with pytest.raises(ValueError):
            CapacityQuery(b, s)


class TestSpectrum:
    spec = SqueezingSpectrum(SQUEEZER1_ANCHORS)

    def test_anchor(self):
        assert squeezing_at_frequency(self.spec, 3e6) == 7.5

    def test_midpoint(self):
        assert squeezing_at_frequency(self.spec, 33e6) == pytest.approx(6.7, rel=1e-12)

    def test_vector(self):
        out = squeezing_at_frequency(self.spec, [3e6, 63e6, 200e6])
        np.testing.assert_array_equal(out, [7.5, 5.9, 2.2])

    def test_no_extrapolation(self):
        with pytest.raises(ValueError):
            squeezing_at_frequency(self.spec, 1e6)
        with pytest.raises(ValueError):
            squeezing_at_frequency(self.spec, 201e6)

    @pytest.mark.parametrize("kind", list(Interpolation))
    def test_single_anchor(self, kind):
        s = SqueezingSpectrum(((10e6, 4.2),), kind)
        assert squeezing_at_frequency(s, 10e6) == 4.2

    def test_lorentzian_fit(self):
        s = SqueezingSpectrum(SQUEEZER1_ANCHORS, Interpolation.LORENTZIAN)
        s0, fc = s.lorentzian_params
        f = np.array([a[0] for a in SQUEEZER1_ANCHORS])
        db = np.array([a[1] for a in SQUEEZER1_ANCHORS])
        fitted = squeezing_at_frequency(s, f)
        np.testing.assert_allclose(fitted, s0 / (1 + (f / fc) ** 2))
        # least squares: residual cannot be beaten by nudging either parameter
        base = np.sum((fitted - db) ** 2)
        for ds0, dfc in [(1e-3, 0), (-1e-3, 0), (0, 1e4), (0, -1e4)]:
            alt = (s0 + ds0) / (1 + (f / (fc + dfc)) ** 2)
            assert np.sum((alt - db) ** 2) >= base - 1e-12
        assert np.max(np.abs(fitted - db)) < 0.2

    def test_exact_lorentzian_recovered(self):
        f = np.array([1e6, 20e6, 80e6, 150e6])
        anchors = tuple(zip(f, 8.0 / (1 + (f / 90e6) ** 2)))
        s = SqueezingSpectrum(anchors, "lorentzian")
        s0, fc = s.lorentzian_params
        assert s0 == pytest.approx(8.0, rel=1e-6)
        assert fc == pytest.approx(90e6, rel=1e-6)

    @pytest.mark.parametrize("anchors", [((2e6, 1.0), (1e6, 2.0)), ((1e6, -1.0),), ()])
    def test_invalid(self, anchors):
        with pytest.raises(ValueError):
            SqueezingSpectrum(anchors)

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "spec.csv"
        path.write_text(dump_spectrum_csv(self.spec))
        assert load_spectrum_csv(path).anchors == self.spec.anchors

    def test_csv_bad_header(self):
        with pytest.raises(ValueError):
            load_spectrum_csv("f,db\n1,2\n")
