"""Monte Carlo BER estimation, sweeps and the measured-point reproduction."""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import NoiseModel, calibrate_amplitude, snr_per_bit, transmit
from .modem import (ModemConfig, Scheme, SyncError, Waveform, invert_bpsk_ber, modulate, receive,
                    theoretical_ber)
from .optics import Baseline, ChannelScenario, EprParams, Scenario, squeeze_db_to_r
from .rng import ChannelSeed, derive_stream, random_bits

SNR_CONVENTION = "snr_db is Eb/N0 per bit at the detector (keyed-on bit energy over N0)"
CSV_HEADER = "scheme,scenario,quadrature,snr_db,bits,errors,ber,ci95,theory_ber"

ROLE_PAYLOAD = 0
ROLE_NOISE = 2  # x on ROLE_NOISE, y on ROLE_NOISE + 1


def ci95_halfwidth(errors: int, bits: int) -> float:
    """Normal-approximation 95% half-width; rule of three when errors == 0."""
    if bits <= 0:
        return math.nan
    if errors == 0:
        return 3.0 / bits
    p = errors / bits
    return 1.96 * math.sqrt(p * (1.0 - p) / bits)


@dataclass(frozen=True)
class BerReport:
    scheme: str
    scenario: str
    quadrature: str
    snr_per_bit_db: float
    bits_tested: int
    bit_errors: int
    ber: float
    ci95: float
    theory_ber: float = math.nan
    trials: tuple[float, ...] = ()
    error: str | None = None

    @classmethod
    def from_counts(cls, scheme, scenario, quadrature, snr_db, bits, errors, theory=math.nan,
                    trials=()) -> "BerReport":
        ber = errors / bits if bits else math.nan
        return cls(Scheme.parse(scheme).value, ChannelScenario.of(scenario).name, quadrature,
                   float(snr_db), int(bits), int(errors), ber, ci95_halfwidth(errors, bits),
                   float(theory), tuple(trials))

    @classmethod
    def failed(cls, scheme, scenario, quadrature, snr_db, theory, message) -> "BerReport":
        return cls(Scheme.parse(scheme).value, ChannelScenario.of(scenario).name, quadrature,
                   float(snr_db), 0, 0, math.nan, math.nan, float(theory), (), message)

    @property
    def binomial_sigma(self) -> float:
        p = self.theory_ber if math.isfinite(self.theory_ber) else self.ber
        return math.sqrt(p * (1.0 - p) / self.bits_tested)

    def csv_row(self) -> str:
        return ",".join([self.scheme, self.scenario, self.quadrature, _fmt(self.snr_per_bit_db),
                         str(self.bits_tested), str(self.bit_errors), _fmt(self.ber),
                         _fmt(self.ci95), _fmt(self.theory_ber)])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trials"] = list(self.trials)
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.10g}"


def _seed_for(seed) -> ChannelSeed:
    if isinstance(seed, ChannelSeed):
        return seed
    return ChannelSeed(int(seed), 0)


def run_ber_trial(cfg: ModemConfig, scenario, params: EprParams | None, n_bits: int, seed,
                  *, quadrature: str = "x", noise: NoiseModel | None = None,
                  snl_per_sample: float = 1.0, workers: int = 1) -> BerReport:
    """One seeded frame: modulate -> transmit -> sync -> demodulate -> decide.

    ``seed.stream_index`` is the base of a 16-stream block: payload bits on
    base+0, quadrature noise on base+2 (x) and base+3 (y).  The payload rides
    on ``quadrature``; the other quadrature carries zeros.
    """
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    if quadrature not in ("x", "y"):
        raise ValueError("quadrature must be 'x' or 'y'")
    seed = _seed_for(seed)
    scenario = ChannelScenario.of(scenario)
    if noise is None:
        noise = NoiseModel.for_scenario(scenario, params or EprParams(), snl_per_sample)
    bits = random_bits(seed.substream(ROLE_PAYLOAD), n_bits)
    tx = modulate(bits, cfg)
    idle = Waveform(np.zeros(len(tx)), tx.sample_rate)
    pair = (tx, idle) if quadrature == "x" else (idle, tx)
    rx_x, rx_y = transmit(*pair, scenario, params, seed.substream(ROLE_NOISE), noise=noise, workers=workers)
    rx = rx_x if quadrature == "x" else rx_y
    gamma = snr_per_bit(cfg.amplitude, noise, cfg, quadrature)
    snr_db = 10 * math.log10(gamma) if 0 < gamma < math.inf else (math.inf if gamma else -math.inf)
    try:
        decided = receive(rx, cfg, n_bits)
    except SyncError as e:
        raise SyncError(f"{cfg.scheme.value}/{scenario.name}/{quadrature} "
                        f"(seed {seed.master_seed}, stream {seed.stream_index}): {e}",
                        e.peak, e.offset) from e
    errors = int(np.count_nonzero(decided != bits))
    theory = theoretical_ber(cfg.scheme, gamma) if math.isfinite(gamma) else 0.0
    return BerReport.from_counts(cfg.scheme, scenario, quadrature, snr_db, n_bits, errors, theory)


def run_repeated(cfg: ModemConfig, scenario, params: EprParams | None, n_bits: int, n_trials: int,
                 master_seed: int, *, point_index: int = 0, quadrature: str = "x",
                 noise: NoiseModel | None = None, snl_per_sample: float = 1.0,
                 workers: int = 1) -> BerReport:
    """``n_trials`` independent trials pooled into one report."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")

    def one(t):
        seed = ChannelSeed(master_seed, derive_stream(point_index, t))
        return run_ber_trial(cfg, scenario, params, n_bits, seed, quadrature=quadrature,
                             noise=noise, snl_per_sample=snl_per_sample)

    if workers > 1 and n_trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, range(n_trials)))
    else:
        reports = [one(t) for t in range(n_trials)]
    first = reports[0]
    errors = sum(r.bit_errors for r in reports)
    bits = sum(r.bits_tested for r in reports)
    return BerReport.from_counts(first.scheme, first.scenario, quadrature, first.snr_per_bit_db,
                                 bits, errors, first.theory_ber, [r.ber for r in reports])


# -- sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """Grid over classical-reference Eb/N0 (``snr_db``) or squeezing (``squeezing_db``).

    The modulation amplitude is fixed per point by calibrating against the
    classical channel at ``snr_db`` (or ``fixed_snr_db`` on the squeezing
    axis); each scenario then sees its own noise.  ``calibration`` picks the
    empirical (measured-offset) or model (squeezing-derived) noise.
    """

    axis: str = "snr_db"
    start: float = 0.0
    stop: float = 10.0
    step: float = 1.0
    bits_per_point: int = 100_000
    trials_per_point: int = 1
    schemes: tuple[str, ...] = ("bpsk",)
    scenarios: tuple[str, ...] = ("classical",)
    master_seed: int = 0
    quadrature: str = "x"
    calibration: str = "empirical"
    fixed_snr_db: float = 3.0
    squeezing_db: float = 5.7
    baseline: str = "joint"
    modem: ModemConfig = field(default_factory=ModemConfig)

    def __post_init__(self):
        if self.axis not in ("snr_db", "squeezing_db"):
            raise ValueError("sweep.axis: must be 'snr_db' or 'squeezing_db'")
        if not self.step > 0:
            raise ValueError("sweep.step: must be > 0")
        if not self.start <= self.stop:
            raise ValueError("sweep.start: must be <= stop")
        if self.bits_per_point < 1000:
            raise ValueError("sweep.bits_per_point: must be >= 1000")
        if self.trials_per_point < 1:
            raise ValueError("sweep.trials_per_point: must be >= 1")
        if self.calibration not in ("empirical", "model"):
            raise ValueError("sweep.calibration: must be 'empirical' or 'model'")
        if self.axis == "squeezing_db" and self.calibration != "model":
            raise ValueError("sweep.calibration: the squeezing axis needs the model path")
        if self.axis == "squeezing_db" and self.start < 0:
            raise ValueError("sweep.start: squeezing must be >= 0 dB")
        object.__setattr__(self, "schemes", tuple(Scheme.parse(s).value for s in self.schemes))
        object.__setattr__(self, "scenarios", tuple(ChannelScenario.of(s).name for s in self.scenarios))
        Baseline(self.baseline)

    def grid(self) -> list[float]:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [self.start + i * self.step for i in range(n)]


def _point_noise(spec: SweepSpec, scenario: ChannelScenario, squeezing_db: float) -> NoiseModel:
    if spec.calibration == "empirical":
        classical = NoiseModel.for_scenario(ChannelScenario(Scenario.COHERENT_CLASSICAL, scenario.baseline),
                                            EprParams())
        return NoiseModel.empirical(scenario, classical_variance=classical.variance_x)
    return NoiseModel.for_scenario(scenario, EprParams(r=squeeze_db_to_r(squeezing_db)))


def sweep(spec: SweepSpec, workers: int = 1) -> list[BerReport]:
    """Run every (scheme, scenario, axis value) point; order follows the sweep definition."""
    baseline = Baseline(spec.baseline)
    points = []
    for scheme in spec.schemes:
        for scen in spec.scenarios:
            for value in spec.grid():
                points.append((scheme, ChannelScenario.of(scen, baseline), value))

    def run(indexed):
        idx, (scheme, scenario, value) = indexed
        snr_db = value if spec.axis == "snr_db" else spec.fixed_snr_db
        sq_db = value if spec.axis == "squeezing_db" else spec.squeezing_db
        cfg = replace(spec.modem, scheme=Scheme.parse(scheme))
        classical = ChannelScenario(Scenario.COHERENT_CLASSICAL, baseline)
        amp = calibrate_amplitude(10 ** (snr_db / 10), classical, EprParams(), cfg, quadrature=spec.quadrature)
        cfg = cfg.with_amplitude(amp)
        noise = _point_noise(spec, scenario, sq_db)
        try:
            return run_repeated(cfg, scenario, None, spec.bits_per_point, spec.trials_per_point,
                                spec.master_seed, point_index=idx, quadrature=spec.quadrature, noise=noise)
        except (SyncError, ValueError) as e:
            gamma = snr_per_bit(amp, noise, cfg, spec.quadrature)
            return BerReport.failed(scheme, scenario, spec.quadrature, 10 * math.log10(gamma),
                                    theoretical_ber(scheme, gamma), str(e))

    items = list(enumerate(points))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, items))
    return [run(it) for it in items]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in reports:
        buf.write(r.csv_row() + "\n")
    return buf.getvalue()


def reports_to_json(reports) -> str:
    rows = []
    for r in reports:
        d = r.to_dict()
        rows.append({"scheme": d["scheme"], "scenario": d["scenario"], "quadrature": d["quadrature"],
                     "snr_db": d["snr_per_bit_db"], "bits": d["bits_tested"], "errors": d["bit_errors"],
                     "ber": d["ber"], "ci95": d["ci95"], "theory_ber": d["theory_ber"],
                     "trials": d["trials"], "error": d["error"], "snr_convention": SNR_CONVENTION})
    return json.dumps(rows, indent=2) + "\n"


# -- reproduction of the measured BER points -----------------------------------

# (quadrature, scenario) -> (measured BER, quoted uncertainty)
MEASURED_BER = {
    ("x", "classical"): (2.6e-2, 0.2e-2),
    ("y", "classical"): (3.2e-2, 0.2e-2),
    ("x", "entangled"): (4.0e-4, 0.7e-4),
    ("y", "entangled"): (3.0e-4, 0.9e-4),
    ("x", "thermal"): (1.3e-1, 0.1e-1),
    ("y", "thermal"): (1.4e-1, 0.1e-1),
}
ROW_ORDER = [("x", "classical"), ("x", "entangled"), ("x", "thermal"),
             ("y", "classical"), ("y", "entangled"), ("y", "thermal")]


def acceptance_band(quadrature: str, scenario: str) -> tuple[float, float]:
    ref, _ = MEASURED_BER[(quadrature, scenario)]
    if scenario == "classical":
        return ref * 0.85, ref * 1.15
    if scenario == "thermal":
        return ref * 0.75, ref * 1.25
    return 1e-4, 1e-3


@dataclass(frozen=True)
class ReproductionRow:
    quadrature: str
    scenario: str
    measured_ber: float
    measured_uncertainty: float
    lower: float
    upper: float
    report: BerReport

    @property
    def passed(self) -> bool:
        return self.report.error is None and self.lower <= self.report.ber <= self.upper


@dataclass(frozen=True)
class Reproduction:
    rows: tuple[ReproductionRow, ...]
    classical_snr_db: dict
    master_seed: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, quadrature: str, scenario: str) -> ReproductionRow:
        return next(r for r in self.rows if (r.quadrature, r.scenario) == (quadrature, scenario))

    def to_csv(self) -> str:
        lines = ["quadrature,scenario,snr_db,bits,errors,ber,ci95,theory_ber,measured_ber,"
                 "measured_unc,lower,upper,verdict"]
        for r in self.rows:
            rep = r.report
            lines.append(",".join([r.quadrature, r.scenario, _fmt(rep.snr_per_bit_db), str(rep.bits_tested),
                                   str(rep.bit_errors), _fmt(rep.ber), _fmt(rep.ci95), _fmt(rep.theory_ber),
                                   _fmt(r.measured_ber), _fmt(r.measured_uncertainty), _fmt(r.lower),
                                   _fmt(r.upper), "PASS" if r.passed else "FAIL"]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        out = {
            "master_seed": self.master_seed,
            "snr_convention": SNR_CONVENTION,
            "classical_snr_db": self.classical_snr_db,
            "passed": self.passed,
            "points": [{"quadrature": r.quadrature, "scenario": r.scenario,
                        "measured_ber": r.measured_ber, "measured_uncertainty": r.measured_uncertainty,
                        "lower": r.lower, "upper": r.upper, "passed": r.passed,
                        **{k: v for k, v in r.report.to_dict().items() if k not in ("scenario", "quadrature")}}
                       for r in self.rows],
        }
        return json.dumps(out, indent=2) + "\n"

    def to_text(self) -> str:
        lines = [f"{'quad':4} {'scenario':10} {'snr_db':>7} {'sim BER':>10} {'+/-95%':>9} "
                 f"{'meas. BER':>10} {'band':>21}  verdict"]
        for r in self.rows:
            rep = r.report
            lines.append(f"{r.quadrature:4} {r.scenario:10} {rep.snr_per_bit_db:7.2f} {rep.ber:10.3e} "
                         f"{rep.ci95:9.2e} {r.measured_ber:10.2e} [{r.lower:9.2e},{r.upper:9.2e}]  "
                         f"{'PASS' if r.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def classical_calibration(cfg: ModemConfig | None = None) -> dict[str, tuple[float, float]]:
    """Per quadrature: (fitted classical Eb/N0 linear, amplitude)."""
    cfg = cfg or ModemConfig()
    classical = NoiseModel.empirical("classical")
    out = {}
    for q in ("x", "y"):
        gamma = invert_bpsk_ber(MEASURED_BER[(q, "classical")][0])
        out[q] = (gamma, calibrate_amplitude(gamma, "classical", None, cfg, noise=classical, quadrature=q))
    return out


def reproduce_measured_points(master_seed: int = 0, n_bits: int = 100_000, n_trials: int = 5,
                           cfg: ModemConfig | None = None, workers: int = 1) -> Reproduction:
    """Fit classical Eb/N0 from the measured classical BER, apply the
    measured SNR offsets and Monte Carlo all six points (BPSK).

    The same modulation amplitude is used for all three scenarios of a
    quadrature; only the detection noise differs.
    """
    cfg = replace(cfg or ModemConfig(), scheme=Scheme.BPSK)
    cal = classical_calibration(cfg)
    rows = []
    for idx, (q, scen) in enumerate(ROW_ORDER):
        gamma_cl, amp = cal[q]
        noise = NoiseModel.empirical(scen)
        qcfg = cfg.with_amplitude(amp)
        try:
            rep = run_repeated(qcfg, scen, None, n_bits, n_trials, master_seed, point_index=idx,
                               quadrature=q, noise=noise, workers=workers)
        except SyncError as e:
            gamma = snr_per_bit(amp, noise, qcfg, q)
            rep = BerReport.failed("bpsk", scen, q, 10 * math.log10(gamma), theoretical_ber("bpsk", gamma), str(e))
        ref, unc = MEASURED_BER[(q, scen)]
        lo, hi = acceptance_band(q, scen)
        rows.append(ReproductionRow(q, scen, ref, unc, lo, hi, rep))
    return Reproduction(tuple(rows), {q: 10 * math.log10(cal[q][0]) for q in cal}, master_seed)
