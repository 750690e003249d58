"""Closed-form Gaussian-state formulas for the EPR dense-coding channel.

Units: quadrature variances are in shot-noise-limit (SNL) units, with the
vacuum variance equal to 1 per quadrature per mode.  A two-mode vacuum
therefore has sum/difference variances of 2.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

_DB_PER_NEPER2 = 20.0 / math.log(10.0)  # dB = r * 20/ln10


def squeeze_db_to_r(db: float) -> float:
    """Squeezing degree r for a level ``db`` below the shot noise limit.

    Uses e^(-2r) = 10^(-db/10), i.e. r = db * ln10 / 20.
    """
    if not math.isfinite(db) or db < 0:
        raise ValueError(f"squeezing level must be finite and >= 0 dB, got {db!r}")
    return db / _DB_PER_NEPER2


def r_to_db(r: float) -> float:
    if not math.isfinite(r) or r < 0:
        raise ValueError(f"squeezing degree must be finite and >= 0, got {r!r}")
    return r * _DB_PER_NEPER2


@dataclass(frozen=True)
class EprParams:
    """Squeezing of the two source beams that form the EPR pair.

    ``r`` is the common squeezing degree.  ``r1``/``r2`` override it per
    squeezer: r1 sets the amplitude-sum correlation, r2 the phase-difference
    correlation.
    """

    r: float = 0.0
    r1: float | None = None
    r2: float | None = None

    def __post_init__(self):
        for name in ("r", "r1", "r2"):
            v = getattr(self, name)
            if v is None:
                continue
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"EprParams.{name} must be finite and >= 0, got {v!r}")

    @classmethod
    def from_db(cls, db: float, db2: float | None = None) -> "EprParams":
        if db2 is None:
            return cls(r=squeeze_db_to_r(db))
        r1, r2 = squeeze_db_to_r(db), squeeze_db_to_r(db2)
        return cls(r=0.5 * (r1 + r2), r1=r1, r2=r2)

    @property
    def squeezers(self) -> tuple[float, float]:
        return (self.r if self.r1 is None else self.r1,
                self.r if self.r2 is None else self.r2)

    @property
    def is_symmetric(self) -> bool:
        r1, r2 = self.squeezers
        return r1 == r2


@dataclass(frozen=True)
class QuadratureVariances:
    """Variances of X1±X2 and Y1±Y2 for the EPR pair, in SNL units."""

    sum_x: float
    diff_x: float
    sum_y: float
    diff_y: float


def epr_correlation_variances(params: EprParams) -> QuadratureVariances:
    """Correlation variances of an EPR pair built on a 50/50 beam splitter.

    The two squeezed inputs are combined with a pi/2 relative phase.  For
    equal squeezing this is 2e^(-2r) for the amplitude sum and phase
    difference and 2e^(+2r) for the other two combinations.  With unequal
    squeezers each correlated combination inherits one input's squeezing:
    X1+X2 = sqrt(2) X_a and Y1-Y2 = sqrt(2) X_b.
    """
    r1, r2 = params.squeezers
    return QuadratureVariances(
        sum_x=2.0 * math.exp(-2.0 * r1),
        diff_x=2.0 * math.exp(2.0 * r2),
        sum_y=2.0 * math.exp(2.0 * r1),
        diff_y=2.0 * math.exp(-2.0 * r2),
    )


def thermal_submode_variance(params: EprParams, quadrature: str = "x") -> float:
    """Quadrature variance of one EPR submode observed on its own.

    Equal squeezing gives the thermal variance (e^(-2r) + e^(2r)) / 2 for
    both quadratures.
    """
    r1, r2 = params.squeezers
    if quadrature == "x":
        return 0.5 * (math.exp(-2.0 * r1) + math.exp(2.0 * r2))
    if quadrature == "y":
        return 0.5 * (math.exp(2.0 * r1) + math.exp(-2.0 * r2))
    raise ValueError(f"quadrature must be 'x' or 'y', got {quadrature!r}")


class Scenario(enum.Enum):
    ENTANGLED_JOINT = "entangled"
    COHERENT_CLASSICAL = "classical"
    THERMAL_SINGLE = "thermal"

    @classmethod
    def parse(cls, value: "str | Scenario") -> "Scenario":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "entangled": cls.ENTANGLED_JOINT, "entangled_joint": cls.ENTANGLED_JOINT,
            "joint": cls.ENTANGLED_JOINT, "epr": cls.ENTANGLED_JOINT,
            "classical": cls.COHERENT_CLASSICAL, "coherent": cls.COHERENT_CLASSICAL,
            "coherent_classical": cls.COHERENT_CLASSICAL,
            "thermal": cls.THERMAL_SINGLE, "thermal_single": cls.THERMAL_SINGLE,
            "single": cls.THERMAL_SINGLE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown scenario {value!r}") from None


class Baseline(enum.Enum):
    JOINT_AT_R0 = "joint"
    SINGLE_MODE = "single"


@dataclass(frozen=True)
class ChannelScenario:
    """Detection situation at the receiver.

    ``baseline`` only matters for the classical case: ``JOINT_AT_R0`` uses
    the joint-detection noise of a two-mode vacuum (2), ``SINGLE_MODE`` the
    single-mode vacuum (1).
    """

    tag: Scenario
    baseline: Baseline = Baseline.JOINT_AT_R0

    @classmethod
    def of(cls, value, baseline: Baseline | str = Baseline.JOINT_AT_R0) -> "ChannelScenario":
        if isinstance(value, ChannelScenario):
            return value
        if isinstance(baseline, str):
            baseline = Baseline(baseline)
        return cls(Scenario.parse(value), baseline)

    @property
    def name(self) -> str:
        return self.tag.value


def detection_noise_variance(scenario: ChannelScenario, params: EprParams,
                             quadrature: str = "x") -> float:
    """Noise variance (SNL units) seen by the detector in ``scenario``."""
    scenario = ChannelScenario.of(scenario)
    if scenario.tag is Scenario.COHERENT_CLASSICAL:
        return 2.0 if scenario.baseline is Baseline.JOINT_AT_R0 else 1.0
    if scenario.tag is Scenario.THERMAL_SINGLE:
        return thermal_submode_variance(params, quadrature)
    v = epr_correlation_variances(params)
    if quadrature == "x":
        return v.sum_x
    if quadrature == "y":
        return v.diff_y
    raise ValueError(f"quadrature must be 'x' or 'y', got {quadrature!r}")


def scenario_snr(signal_variance: float, params: EprParams, scenario,
                 quadrature: str = "x") -> float:
    """Linear SNR of a displacement with variance ``signal_variance``."""
    if not signal_variance >= 0:
        raise ValueError(f"signal variance must be >= 0, got {signal_variance!r}")
    return signal_variance / detection_noise_variance(scenario, params, quadrature)


@dataclass(frozen=True)
class CapacityQuery:
    bandwidth_hz: float
    snr: float

    def __post_init__(self):
        if not (math.isfinite(self.bandwidth_hz) and self.bandwidth_hz > 0):
            raise ValueError(f"bandwidth must be > 0 Hz, got {self.bandwidth_hz!r}")
        if not self.snr >= 0:
            raise ValueError(f"snr must be >= 0, got {self.snr!r}")


def channel_capacity(q: CapacityQuery) -> float:
    """Shannon capacity B*log2(1+SNR) in bits/s."""
    return q.bandwidth_hz * math.log2(1.0 + q.snr)


# -- squeezing spectrum --------------------------------------------------------

class Interpolation(enum.Enum):
    PIECEWISE = "piecewise"
    LORENTZIAN = "lorentzian"


def _lorentzian(f, s0, fc):
    return s0 / (1.0 + (f / fc) ** 2)


@dataclass(frozen=True)
class SqueezingSpectrum:
    """Squeezing level (dB below SNL) against sideband frequency."""

    anchors: tuple[tuple[float, float], ...]
    kind: Interpolation = Interpolation.PIECEWISE
    _fit: tuple[float, float] | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        anchors = tuple((float(f), float(db)) for f, db in self.anchors)
        if not anchors:
            raise ValueError("spectrum needs at least one anchor")
        freqs = [f for f, _ in anchors]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("anchor frequencies must be strictly increasing")
        if any(f <= 0 for f in freqs):
            raise ValueError("anchor frequencies must be > 0 Hz")
        if any(not (db >= 0) for _, db in anchors):
            raise ValueError("anchor squeezing levels must be >= 0 dB")
        object.__setattr__(self, "anchors", anchors)
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", Interpolation(self.kind))
        if self.kind is Interpolation.LORENTZIAN and len(anchors) > 1:
            object.__setattr__(self, "_fit", _fit_lorentzian(anchors))

    @property
    def lorentzian_params(self) -> tuple[float, float] | None:
        """Fitted (S0 dB, corner frequency Hz), if in Lorentzian mode."""
        return self._fit

    def __call__(self, f):
        return squeezing_at_frequency(self, f)


def _fit_lorentzian(anchors) -> tuple[float, float]:
    f = np.array([a[0] for a in anchors])
    s = np.array([a[1] for a in anchors])
    p0 = (float(s.max()), float(np.median(f)))
    (s0, fc), _ = curve_fit(_lorentzian, f, s, p0=p0,
                            bounds=([0.0, 1e-9 * f.max()], [np.inf, np.inf]))
    return float(s0), float(fc)


def squeezing_at_frequency(spec: SqueezingSpectrum, f):
    """Squeezing in dB at sideband frequency ``f`` (scalar or array)."""
    f_arr = np.asarray(f, dtype=float)
    freqs = np.array([a[0] for a in spec.anchors])
    dbs = np.array([a[1] for a in spec.anchors])
    if spec.kind is Interpolation.PIECEWISE:
        if np.any(f_arr < freqs[0]) or np.any(f_arr > freqs[-1]):
            raise ValueError(
                f"frequency outside anchor span [{freqs[0]:g}, {freqs[-1]:g}] Hz")
        out = np.interp(f_arr, freqs, dbs)
    else:
        if np.any(f_arr <= 0):
            raise ValueError("frequency must be > 0 Hz")
        if spec._fit is None:
            out = np.full_like(f_arr, dbs[0])
        else:
            out = _lorentzian(f_arr, *spec._fit)
    return float(out) if out.ndim == 0 else out


def load_spectrum_csv(source, kind: Interpolation | str = Interpolation.PIECEWISE) -> SqueezingSpectrum:
    """Read anchors from CSV text/path with header ``freq_hz,squeeze_db``."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        text = Path(source).read_text()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != ["freq_hz", "squeeze_db"]:
        raise ValueError("spectrum CSV header must be 'freq_hz,squeeze_db'")
    anchors = [(float(row["freq_hz"]), float(row["squeeze_db"])) for row in reader]
    return SqueezingSpectrum(tuple(anchors), Interpolation(kind) if isinstance(kind, str) else kind)


def dump_spectrum_csv(spec: SqueezingSpectrum) -> str:
    lines = ["freq_hz,squeeze_db"]
    lines += [f"{f!r},{db!r}" for f, db in spec.anchors]
    return "\n".join(lines) + "\n"


# Measured source data (dB below SNL).
SQUEEZER1_ANCHORS: Sequence[tuple[float, float]] = ((3e6, 7.5), (63e6, 5.9), (200e6, 2.2))
SQUEEZER2_ANCHORS: Sequence[tuple[float, float]] = ((3e6, 7.0), (63e6, 5.7), (200e6, 2.1))
AMPLITUDE_SUM_CORRELATION: Sequence[tuple[float, float]] = ((3e6, 6.4), (200e6, 2.0))
PHASE_DIFF_CORRELATION: Sequence[tuple[float, float]] = ((3e6, 6.4), (200e6, 1.9))
