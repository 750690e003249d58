"""Command-line front end.

Exit codes: 0 ok, 2 usage/config, 3 sync failure, 4 reproduction outside
tolerance, 5 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import harness
from .channel import NoiseModel, calibrate_amplitude, snr_per_bit
from .imaging import PbmError, default_test_image, load_pbm, transmit_image, write_received
from .modem import ConfigError, ModemConfig, Scheme, SyncError, theoretical_ber
from .optics import (AMPLITUDE_SUM_CORRELATION, PHASE_DIFF_CORRELATION, SQUEEZER1_ANCHORS,
                     SQUEEZER2_ANCHORS, Baseline, CapacityQuery, ChannelScenario, EprParams, Scenario,
                     SqueezingSpectrum, channel_capacity, load_spectrum_csv, scenario_snr,
                     squeeze_db_to_r, squeezing_at_frequency)
from .rng import ChannelSeed, derive_stream

EXIT_OK, EXIT_USAGE, EXIT_SYNC, EXIT_REPRO, EXIT_IO = 0, 2, 3, 4, 5

SPECTRUM_SOURCES = {
    "sq1": SQUEEZER1_ANCHORS,
    "sq2": SQUEEZER2_ANCHORS,
    "amp-sum": AMPLITUDE_SUM_CORRELATION,
    "phase-diff": PHASE_DIFF_CORRELATION,
}


class UsageError(Exception):
    pass


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(value)


def _default_seed() -> int:
    env = os.environ.get("QRFOL_SEED")
    return _int(env) if env else 0


# -- argument groups -------------------------------------------------------------

def _add_modem(p):
    g = p.add_argument_group("modem")
    g.add_argument("--scheme", default="bpsk", choices=[s.value for s in Scheme], help="keying scheme")
    g.add_argument("--carrier-hz", type=float, default=43e6, help="BPSK/BASK subcarrier [Hz]")
    g.add_argument("--mark-hz", type=float, default=53e6, help="BFSK mark tone [Hz]")
    g.add_argument("--space-hz", type=float, default=33e6, help="BFSK space tone [Hz]")
    g.add_argument("--bit-rate", type=float, default=20e6, help="bit rate [bit/s]")
    g.add_argument("--sample-rate", type=float, default=400e6, help="sample rate [Hz]")
    g.add_argument("--band-low", type=float, default=23e6, help="passband lower edge [Hz]")
    g.add_argument("--band-high", type=float, default=63e6, help="passband upper edge [Hz]")


def _add_channel(p, scenario_default="classical"):
    g = p.add_argument_group("channel")
    g.add_argument("--scenario", default=scenario_default,
                   choices=["entangled", "classical", "thermal"], help="detection scenario")
    g.add_argument("--calibration", default="empirical", choices=["empirical", "model"],
                   help="noise from measured SNR offsets (empirical) or from squeezing (model)")
    g.add_argument("--squeezing-db", type=float, default=5.7,
                   help="squeezing for the model path [dB below SNL]")
    g.add_argument("--r", type=float, default=None, help="squeezing degree r [dimensionless]; overrides --squeezing-db")
    g.add_argument("--baseline", default="joint", choices=["joint", "single"],
                   help="classical noise normalization: two-mode (2 SNL) or single-mode (1 SNL)")
    g.add_argument("--snl-per-sample", type=float, default=1.0,
                   help="per-sample noise variance of one SNL unit [amplitude^2]")
    g.add_argument("--quadrature", default="x", choices=["x", "y"], help="quadrature carrying the payload")


def _add_output(p, formats=("csv", "json")):
    g = p.add_argument_group("output")
    g.add_argument("--format", default=formats[0], choices=list(formats), help="output format")
    g.add_argument("--out", default=None, help="output file path [default: stdout]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrfol", description="Quantum RF-over-light dense-coding simulator")
    parser.add_argument("--config", default=None, help="flat key=value file; keys are flag names")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="Shannon capacity B*log2(1+SNR)")
    p.add_argument("--bandwidth-hz", type=float, required=True, help="bandwidth B [Hz]")
    p.add_argument("--snr-db", type=float, default=None, help="linear SNR given in [dB]")
    p.add_argument("--squeezing-db", type=float, default=None, help="EPR squeezing [dB below SNL]")
    p.add_argument("--signal-var", type=float, default=None, help="signal variance [SNL units]")
    p.add_argument("--scenario", default=None, choices=["entangled", "classical", "thermal"],
                   help="detection scenario for the squeezing path")
    p.add_argument("--baseline", default="joint", choices=["joint", "single"], help="classical normalization")
    p.add_argument("--quadrature", default="x", choices=["x", "y"], help="quadrature")
    p.add_argument("--format", default="text", choices=["text", "json"], help="output format")

    p = sub.add_parser("spectrum", help="squeezing level against sideband frequency")
    p.add_argument("--freq-hz", type=float, nargs="+", required=True, help="sideband frequencies [Hz]")
    p.add_argument("--source", default="sq1", choices=sorted(SPECTRUM_SOURCES), help="built-in anchor set")
    p.add_argument("--anchors", default=None, help="CSV file with header freq_hz,squeeze_db")
    p.add_argument("--kind", default="piecewise", choices=["piecewise", "lorentzian"], help="interpolation")
    p.add_argument("--format", default="text", choices=["text", "json"], help="output format")

    p = sub.add_parser("ber", help="Monte Carlo BER at one operating point")
    _add_modem(p)
    _add_channel(p)
    p.add_argument("--snr-db", type=float, default=0.0,
                   help="classical-reference Eb/N0 that sets the modulation amplitude [dB]")
    p.add_argument("--amplitude", type=float, default=None, help="explicit amplitude [SNL^0.5]; replaces --snr-db")
    p.add_argument("--bits", type=_int, default=100_000, help="payload bits per trial [bits]")
    p.add_argument("--trials", type=_int, default=1, help="independent trials [count]")
    p.add_argument("--seed", type=_int, default=None, help="master seed [default: $QRFOL_SEED or 0]")
    _add_output(p)

    p = sub.add_parser("sweep", help="BER grid over Eb/N0 or squeezing")
    _add_modem(p)
    p.add_argument("--axis", default="snr_db", choices=["snr_db", "squeezing_db"], help="swept quantity")
    p.add_argument("--start", type=float, default=0.0, help="first axis value [dB]")
    p.add_argument("--stop", type=float, default=10.0, help="last axis value [dB]")
    p.add_argument("--step", type=float, default=1.0, help="axis step [dB]")
    p.add_argument("--schemes", default="bpsk", help="comma-separated schemes")
    p.add_argument("--scenarios", default="classical", help="comma-separated scenarios")
    p.add_argument("--calibration", default="empirical", choices=["empirical", "model"], help="noise path")
    p.add_argument("--fixed-snr-db", type=float, default=3.0, help="classical Eb/N0 on the squeezing axis [dB]")
    p.add_argument("--squeezing-db", type=float, default=5.7, help="squeezing on the snr axis, model path [dB]")
    p.add_argument("--baseline", default="joint", choices=["joint", "single"], help="classical normalization")
    p.add_argument("--quadrature", default="x", choices=["x", "y"], help="payload quadrature")
    p.add_argument("--bits", type=_int, default=100_000, help="payload bits per trial [bits]")
    p.add_argument("--trials", type=_int, default=1, help="trials per point [count]")
    p.add_argument("--seed", type=_int, default=None, help="master seed [default: $QRFOL_SEED or 0]")
    p.add_argument("--workers", type=_int, default=1, help="worker threads [count]")
    _add_output(p)

    p = sub.add_parser("reproduce", help="Monte Carlo of the six measured BER points")
    p.add_argument("--seed", type=_int, default=None, help="master seed [default: $QRFOL_SEED or 0]")
    p.add_argument("--bits", type=_int, default=100_000, help="bits per trial [bits]")
    p.add_argument("--trials", type=_int, default=5, help="trials per point [count]")
    p.add_argument("--workers", type=_int, default=1, help="worker threads [count]")
    _add_output(p, ("text", "csv", "json"))

    p = sub.add_parser("image", help="send a PBM image through one scenario")
    _add_modem(p)
    _add_channel(p)
    p.add_argument("--in", dest="input", required=True,
                   help="input PBM path, or 'builtin' for the 250x400 test pattern")
    p.add_argument("--out", required=True, help="received PBM path (sidecar: <out>.json)")
    p.add_argument("--image-quadrature", default=None, choices=["x", "y", "dual"],
                   help="overrides --quadrature; 'dual' splits the image over both")
    p.add_argument("--snr-db", type=float, default=None,
                   help="classical-reference Eb/N0 [dB]; default: fitted from the measured classical BER")
    p.add_argument("--noiseless", action="store_true", help="disable channel noise")
    p.add_argument("--seed", type=_int, default=None, help="master seed [default: $QRFOL_SEED or 0]")

    sub.add_parser("selftest", help="fast internal consistency checks")
    return parser


# -- config ----------------------------------------------------------------------

def _config_tokens(path: str, parser: argparse.ArgumentParser, command: str) -> list[str]:
    sub = _subparser(parser, command)
    flags = {opt: a for a in sub._actions for opt in a.option_strings}
    tokens = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key
        if flag not in flags:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r} for '{command}'")
        action = flags[flag]
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append(flag)
        elif action.nargs == "+":
            tokens += [flag, *value.replace(",", " ").split()]
        else:
            tokens += [flag, value]
    return tokens


def _subparser(parser, command):
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            return a if command is None else a.choices[command]
    raise KeyError(command)


def parse_args(argv, parser=None):
    parser = parser or build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, rest = pre.parse_known_args(argv)
    if known.config is None or not rest or rest[0] not in _subparser(parser, None).choices:
        return parser.parse_args(argv)
    try:
        tokens = _config_tokens(known.config, parser, rest[0])
    except OSError as e:
        raise UsageError(f"cannot read config: {e}") from e
    args = parser.parse_args([rest[0]] + tokens + rest[1:])
    args.config = known.config
    return args


@dataclass(frozen=True)
class RunConfig:
    modem: ModemConfig
    scenario: ChannelScenario
    params: EprParams
    calibration: str
    snl_per_sample: float
    quadrature: str
    seed: int


def _modem_from(args) -> ModemConfig:
    return ModemConfig(scheme=args.scheme, carrier_hz=args.carrier_hz, mark_hz=args.mark_hz,
                       space_hz=args.space_hz, bit_rate=args.bit_rate, sample_rate=args.sample_rate,
                       band_low=args.band_low, band_high=args.band_high)


def run_config(args) -> RunConfig:
    """Validate every field before any computation starts."""
    modem = _modem_from(args)
    if args.r is not None:
        if not (math.isfinite(args.r) and args.r >= 0):
            raise ConfigError("channel.r", "must be finite and >= 0")
        params = EprParams(r=args.r)
    else:
        try:
            params = EprParams(r=squeeze_db_to_r(args.squeezing_db))
        except ValueError as e:
            raise ConfigError("channel.squeezing_db", str(e)) from e
    if not (math.isfinite(args.snl_per_sample) and args.snl_per_sample >= 0):
        raise ConfigError("channel.snl_per_sample", "must be finite and >= 0")
    seed = _default_seed() if args.seed is None else args.seed
    if seed < 0:
        raise ConfigError("harness.seed", "must be >= 0")
    if getattr(args, "bits", 1) < 1:
        raise ConfigError("harness.bits", "must be >= 1")
    if getattr(args, "trials", 1) < 1:
        raise ConfigError("harness.trials", "must be >= 1")
    return RunConfig(modem, ChannelScenario.of(args.scenario, Baseline(args.baseline)), params,
                     args.calibration, args.snl_per_sample, args.quadrature, seed)


def _noise_for(rc: RunConfig) -> NoiseModel:
    if rc.calibration == "empirical":
        classical_var = 2.0 if rc.scenario.baseline is Baseline.JOINT_AT_R0 else 1.0
        return NoiseModel.empirical(rc.scenario, classical_variance=classical_var, snl_per_sample=rc.snl_per_sample)
    return NoiseModel.for_scenario(rc.scenario, rc.params, rc.snl_per_sample)


def _classical_amplitude(rc: RunConfig, snr_db: float) -> float:
    classical = ChannelScenario(Scenario.COHERENT_CLASSICAL, rc.scenario.baseline)
    noise = NoiseModel.for_scenario(classical, EprParams(), rc.snl_per_sample if rc.snl_per_sample > 0 else 1.0)
    return calibrate_amplitude(10 ** (snr_db / 10), classical, None, rc.modem, noise=noise,
                               quadrature=rc.quadrature)


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands --------------------------------------------------------------------

def cmd_capacity(args) -> int:
    squeeze_set = [args.squeezing_db, args.signal_var, args.scenario]
    if args.snr_db is not None and any(v is not None for v in squeeze_set):
        raise UsageError("give either --snr-db or --squeezing-db/--signal-var/--scenario, not both")
    if args.snr_db is not None:
        snr = 10 ** (args.snr_db / 10)
    elif all(v is not None for v in squeeze_set):
        params = EprParams(r=squeeze_db_to_r(args.squeezing_db))
        snr = scenario_snr(args.signal_var, params, ChannelScenario.of(args.scenario, Baseline(args.baseline)),
                           args.quadrature)
    else:
        raise UsageError("need --snr-db or all of --squeezing-db, --signal-var, --scenario")
    q = CapacityQuery(args.bandwidth_hz, snr)
    cap = channel_capacity(q)
    if args.format == "json":
        print(json.dumps({"bandwidth_hz": q.bandwidth_hz, "snr_linear": snr, "capacity_bps": cap}))
    else:
        print(f"bandwidth_hz={q.bandwidth_hz:.6g} snr_linear={snr:.6g} capacity_bps={cap:.6g}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    if args.anchors:
        spec = load_spectrum_csv(Path(args.anchors), args.kind)
    else:
        spec = SqueezingSpectrum(tuple(SPECTRUM_SOURCES[args.source]), args.kind)
    rows = []
    for f in args.freq_hz:
        db = float(squeezing_at_frequency(spec, f))
        rows.append({"freq_hz": f, "squeeze_db": db, "r": squeeze_db_to_r(db)})
    if args.format == "json":
        print(json.dumps(rows))
    else:
        for r in rows:
            print(f"freq_hz={r['freq_hz']:.6g} squeeze_db={r['squeeze_db']:.6g} r={r['r']:.6g}")
    return EXIT_OK


def cmd_ber(args) -> int:
    rc = run_config(args)
    if args.amplitude is not None:
        amp = args.amplitude
    else:
        amp = _classical_amplitude(rc, args.snr_db)
    cfg = rc.modem.with_amplitude(amp)
    report = harness.run_repeated(cfg, rc.scenario, rc.params, args.bits, args.trials, rc.seed,
                                  quadrature=rc.quadrature, noise=_noise_for(rc))
    text = harness.reports_to_json([report]) if args.format == "json" else harness.reports_to_csv([report])
    _emit(text, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    try:
        spec = harness.SweepSpec(
            axis=args.axis, start=args.start, stop=args.stop, step=args.step,
            bits_per_point=args.bits, trials_per_point=args.trials,
            schemes=tuple(s for s in args.schemes.split(",") if s),
            scenarios=tuple(s for s in args.scenarios.split(",") if s),
            master_seed=seed, quadrature=args.quadrature, calibration=args.calibration,
            fixed_snr_db=args.fixed_snr_db, squeezing_db=args.squeezing_db, baseline=args.baseline,
            modem=_modem_from(args))
    except ValueError as e:
        raise ConfigError(str(e).split(":")[0], str(e).split(":", 1)[-1].strip()) from e
    reports = harness.sweep(spec, workers=args.workers)
    text = harness.reports_to_json(reports) if args.format == "json" else harness.reports_to_csv(reports)
    _emit(text, args.out)
    failed = [r for r in reports if r.error]
    for r in failed:
        print(f"point failed: {r.scheme}/{r.scenario} snr_db={r.snr_per_bit_db:.3f}: {r.error}", file=sys.stderr)
    return EXIT_SYNC if failed else EXIT_OK


def cmd_reproduce(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    rep = harness.reproduce_measured_points(seed, n_bits=args.bits, n_trials=args.trials, workers=args.workers)
    text = {"text": rep.to_text, "csv": rep.to_csv, "json": rep.to_json}[args.format]()
    _emit(text, args.out)
    if not rep.passed:
        for r in rep.rows:
            if not r.passed:
                print(f"FAIL {r.quadrature}/{r.scenario}: ber={r.report.ber:.4g} outside "
                      f"[{r.lower:.3g}, {r.upper:.3g}]" + (f" ({r.report.error})" if r.report.error else ""),
                      file=sys.stderr)
        return EXIT_REPRO
    return EXIT_OK


def cmd_image(args) -> int:
    rc = run_config(args)
    quadrature = args.image_quadrature or rc.quadrature
    try:
        image = default_test_image() if args.input == "builtin" else load_pbm(Path(args.input).read_bytes())
    except (OSError, PbmError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    cal_q = "x" if quadrature == "dual" else quadrature
    if args.snr_db is None:
        amp = harness.classical_calibration(rc.modem)[cal_q][1]
    else:
        amp = _classical_amplitude(replace(rc, quadrature=cal_q), args.snr_db)
    cfg = rc.modem.with_amplitude(amp)
    noise = _noise_for(rc)
    if args.noiseless:
        noise = replace(noise, snl_per_sample=0.0)
    seed = ChannelSeed(rc.seed, derive_stream(0, 0, 2))
    result = transmit_image(image, cfg, rc.scenario, rc.params, seed, quadrature=quadrature, noise=noise)
    gamma = snr_per_bit(amp, noise, cfg, cal_q)
    meta = {"seed": rc.seed, "calibration": rc.calibration, "amplitude": amp, "scheme": cfg.scheme.value,
            "noiseless": bool(args.noiseless),
            "snr_db": None if math.isinf(gamma) else 10 * math.log10(gamma),
            "theory_ber": 0.0 if math.isinf(gamma) else theoretical_ber(cfg.scheme, gamma),
            "input": args.input}
    try:
        write_received(args.out, result, meta)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"scenario={result.scenario} quadrature={quadrature} pixel_errors={result.pixel_errors} "
          f"pixel_error_rate={result.pixel_error_rate:.6g}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    import numpy as np
    from .modem import modulate, receive
    from .optics import epr_correlation_variances
    checks = []
    v = epr_correlation_variances(EprParams(r=0.7))
    checks.append(("epr uncertainty product", abs(v.sum_x * v.diff_x - 4) < 1e-12))
    checks.append(("capacity", channel_capacity(CapacityQuery(40e6, 3)) == 80e6))
    checks.append(("bpsk ber at 0 dB", abs(theoretical_ber("bpsk", 1.0) - 0.0786496) < 1e-6))
    bits = np.arange(2000) % 3 % 2
    for scheme in Scheme:
        cfg = ModemConfig(scheme=scheme)
        checks.append((f"{scheme.value} loopback", bool(np.array_equal(receive(modulate(bits, cfg), cfg), bits))))
    ok = True
    for name, passed in checks:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}")
    return EXIT_OK if ok else 1


COMMANDS = {
    "capacity": cmd_capacity, "spectrum": cmd_spectrum, "ber": cmd_ber, "sweep": cmd_sweep,
    "reproduce": cmd_reproduce, "image": cmd_image, "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parse_args(argv, parser)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SyncError as e:
        print(f"sync failure: {e}", file=sys.stderr)
        return EXIT_SYNC
    except (OSError, PbmError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"invalid argument: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
