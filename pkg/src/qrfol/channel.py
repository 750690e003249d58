"""Detection-scenario channel: additive Gaussian quadrature noise.

The EPR physics enters only through per-quadrature noise variances (SNL
units).  Two calibration paths exist:

* model: variances from the squeezing degree r (``NoiseModel.for_scenario``);
* empirical: the classical variance shifted by measured SNR offsets
  (``NoiseModel.empirical``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .modem import ModemConfig, Waveform
from .optics import (Baseline, ChannelScenario, EprParams, Scenario, SqueezingSpectrum,
                     detection_noise_variance, squeezing_at_frequency)
from .rng import ChannelSeed, standard_normal

__all__ = [
    "Baseline", "ChannelScenario", "ChannelSeed", "NoiseModel", "Scenario", "SnrOffsets",
    "calibrate_amplitude", "scenario_noise_variance", "scenario_snr_offsets_db", "transmit",
]

_BLOCK = 1 << 20


class SnrOffsets(NamedTuple):
    joint_gain_x: float
    joint_gain_y: float
    single_penalty_x: float
    single_penalty_y: float


def scenario_snr_offsets_db() -> SnrOffsets:
    """Measured SNR change against the classical system, in dB."""
    return SnrOffsets(5.7, 5.6, -4.6, -4.9)


def scenario_noise_variance(scenario, params: EprParams) -> tuple[float, float]:
    scenario = ChannelScenario.of(scenario)
    return (detection_noise_variance(scenario, params, "x"),
            detection_noise_variance(scenario, params, "y"))


@dataclass(frozen=True)
class NoiseModel:
    """Per-quadrature noise in SNL units and its per-sample scale.

    In ``spectrum`` mode ``profile_x``/``profile_y`` map frequency (Hz) to
    the SNL variance at that frequency; white noise is coloured by
    sqrt(profile) in the frequency domain.
    """

    variance_x: float
    variance_y: float
    snl_per_sample: float = 1.0
    bandwidth_mode: str = "white"
    profile_x: Callable | None = None
    profile_y: Callable | None = None

    def __post_init__(self):
        for name in ("variance_x", "variance_y", "snl_per_sample"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"NoiseModel.{name} must be finite and >= 0, got {v!r}")
        if self.bandwidth_mode not in ("white", "spectrum"):
            raise ValueError(f"unknown bandwidth_mode {self.bandwidth_mode!r}")
        if self.bandwidth_mode == "spectrum" and (self.profile_x is None or self.profile_y is None):
            raise ValueError("spectrum mode needs profile_x and profile_y")

    @classmethod
    def for_scenario(cls, scenario, params: EprParams, snl_per_sample: float = 1.0) -> "NoiseModel":
        vx, vy = scenario_noise_variance(scenario, params)
        return cls(vx, vy, snl_per_sample)

    @classmethod
    def empirical(cls, scenario, offsets: SnrOffsets | None = None,
                  classical_variance: float = 2.0, snl_per_sample: float = 1.0) -> "NoiseModel":
        """Classical variance scaled so the SNR moves by the measured offsets."""
        tag = ChannelScenario.of(scenario).tag
        o = offsets or scenario_snr_offsets_db()
        if tag is Scenario.COHERENT_CLASSICAL:
            dx = dy = 0.0
        elif tag is Scenario.ENTANGLED_JOINT:
            dx, dy = o.joint_gain_x, o.joint_gain_y
        else:
            dx, dy = o.single_penalty_x, o.single_penalty_y
        return cls(classical_variance * 10 ** (-dx / 10), classical_variance * 10 ** (-dy / 10), snl_per_sample)

    @classmethod
    def from_spectrum(cls, scenario, spectrum_x: SqueezingSpectrum, spectrum_y: SqueezingSpectrum,
                      snl_per_sample: float = 1.0) -> "NoiseModel":
        """Frequency-dependent noise from measured correlation spectra.

        Frequencies outside the anchor span are clamped to the end anchors.
        """
        scenario = ChannelScenario.of(scenario)

        def profile(spectrum, quadrature):
            lo, hi = spectrum.anchors[0][0], spectrum.anchors[-1][0]

            def var(f):
                db = np.asarray(squeezing_at_frequency(spectrum, np.clip(np.asarray(f, float), lo, hi)))
                squeezed = 10.0 ** (-db / 10.0)  # e^(-2r)
                if scenario.tag is Scenario.ENTANGLED_JOINT:
                    return 2.0 * squeezed
                if scenario.tag is Scenario.THERMAL_SINGLE:
                    return 0.5 * (squeezed + 1.0 / squeezed)
                return np.full_like(squeezed, detection_noise_variance(scenario, EprParams(), quadrature))
            return var

        px, py = profile(spectrum_x, "x"), profile(spectrum_y, "y")
        mid = 0.5 * (spectrum_x.anchors[0][0] + spectrum_x.anchors[-1][0])
        return cls(float(px(mid)), float(py(mid)), snl_per_sample, "spectrum", px, py)

    def sigma2(self, quadrature: str) -> float:
        v = self.variance_x if quadrature == "x" else self.variance_y
        return v * self.snl_per_sample


def _white(seed: ChannelSeed, n: int, workers: int) -> np.ndarray:
    if workers <= 1 or n <= _BLOCK:
        return standard_normal(seed, 0, n)
    starts = list(range(0, n, _BLOCK))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda s: standard_normal(seed, s, min(_BLOCK, n - s)), starts))
    return np.concatenate(parts)


def transmit(w_x: Waveform, w_y: Waveform, scenario, params: EprParams | None, seed: ChannelSeed,
             *, noise: NoiseModel | None = None, snl_per_sample: float = 1.0,
             workers: int = 1) -> tuple[Waveform, Waveform]:
    """Add independent Gaussian noise to the two quadrature waveforms.

    Quadrature x draws from ``seed.stream_index``, y from the next stream.
    ``noise`` overrides the model-path variances derived from ``params``.
    """
    if len(w_x) != len(w_y):
        raise ValueError(f"quadrature lengths differ: {len(w_x)} vs {len(w_y)}")
    if w_x.sample_rate != w_y.sample_rate:
        raise ValueError("quadrature sample rates differ")
    if noise is None:
        if params is None:
            raise ValueError("pass either params or an explicit NoiseModel")
        noise = NoiseModel.for_scenario(scenario, params, snl_per_sample)
    out = []
    shaped = noise.bandwidth_mode == "spectrum"
    for i, (w, quad) in enumerate(((w_x, "x"), (w_y, "y"))):
        if noise.snl_per_sample == 0:
            out.append(Waveform(w.samples.copy(), w.sample_rate))
            continue
        if shaped:
            profile = noise.profile_x if quad == "x" else noise.profile_y
            z = _white(seed.substream(i), len(w), workers)
            freqs = np.fft.rfftfreq(len(w), d=1.0 / w.sample_rate)
            gain = np.sqrt(np.maximum(profile(np.maximum(freqs, 1.0)), 0.0) * noise.snl_per_sample)
            n = np.fft.irfft(np.fft.rfft(z) * gain, n=len(w))
        else:
            n = math.sqrt(noise.sigma2(quad)) * _white(seed.substream(i), len(w), workers)
        out.append(Waveform(w.samples + n, w.sample_rate))
    return out[0], out[1]


def calibrate_amplitude(target_snr_per_bit: float, scenario, params: EprParams | None,
                        cfg: ModemConfig, *, noise: NoiseModel | None = None,
                        quadrature: str = "x", snl_per_sample: float = 1.0) -> float:
    """Amplitude A giving Eb/N0 = target for the matched filter.

    With per-sample noise variance s2 = N0/2 and bit energy A^2*N_s/2,
    Eb/N0 = A^2*N_s / (4*s2).  The BPSK soft-value SNR mean^2/var is 2*Eb/N0.
    """
    if not (math.isfinite(target_snr_per_bit) and target_snr_per_bit > 0):
        raise ValueError(f"target snr must be > 0, got {target_snr_per_bit!r}")
    if noise is None:
        if params is None:
            raise ValueError("pass either params or an explicit NoiseModel")
        noise = NoiseModel.for_scenario(scenario, params, snl_per_sample)
    s2 = noise.sigma2(quadrature)
    if s2 <= 0:
        raise ValueError("noise variance is zero; any finite amplitude has infinite SNR")
    return math.sqrt(4.0 * s2 * target_snr_per_bit / cfg.samples_per_bit)


def snr_per_bit(amplitude: float, noise: NoiseModel, cfg: ModemConfig, quadrature: str = "x") -> float:
    """Eb/N0 (linear) produced by ``amplitude`` under ``noise``."""
    s2 = noise.sigma2(quadrature)
    if s2 == 0:
        return math.inf
    return amplitude ** 2 * cfg.samples_per_bit / (4.0 * s2)

