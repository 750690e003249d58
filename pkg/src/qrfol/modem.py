"""Binary keying on an RF subcarrier: NRZ baseband, BPSK/BFSK/BASK
modulation, preamble synchronization and integrate-and-dump demodulation.

Frames are ``preamble + payload``.  The preamble is always BPSK so one
synchronizer serves every scheme.  Carrier phase is referenced to the
first sample of the frame, and the receiver is assumed carrier- and
phase-locked once the frame start is known.
"""

from __future__ import annotations

import enum
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .rng import ChannelSeed, random_bits


class Scheme(enum.Enum):
    BPSK = "bpsk"
    BFSK = "bfsk"
    BASK = "bask"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}") from None


class ConfigError(ValueError):
    """A modem/channel/harness configuration violates its invariants."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


class EmptyPayloadError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


class SyncError(RuntimeError):
    """No preamble found above the correlation threshold."""

    def __init__(self, message: str, peak: float = float("nan"), offset: int = -1):
        super().__init__(message)
        self.peak = peak
        self.offset = offset


PREAMBLE_BITS = 64
# Fixed sync word: the first 64 bits of stream (seed 0, index 0).
DEFAULT_PREAMBLE: tuple[int, ...] = tuple(int(b) for b in random_bits(ChannelSeed(0, 0), PREAMBLE_BITS))


@dataclass(frozen=True)
class BitStream:
    bits: np.ndarray
    bit_rate: float = 20e6

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if b.size and not np.isin(b, (0, 1)).all():
            raise ValueError("bits must be 0 or 1")
        object.__setattr__(self, "bits", b.astype(np.uint8))
        if not self.bit_rate > 0:
            raise ValueError("bit_rate must be > 0")

    def __len__(self):
        return self.bits.size

    def __array__(self, dtype=None, copy=None):
        return self.bits if dtype is None else self.bits.astype(dtype)


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")
        if not np.isfinite(s).all():
            raise ValueError("waveform samples must be finite")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError("sample_rate must be > 0")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("sample_index,amplitude\n")
        for i, v in enumerate(self.samples):
            buf.write(f"{i},{float(v)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, sample_rate: float) -> "Waveform":
        lines = text.strip().splitlines()
        if not lines or lines[0].strip() != "sample_index,amplitude":
            raise ValueError("waveform CSV header must be 'sample_index,amplitude'")
        values = []
        for lineno, line in enumerate(lines[1:], start=2):
            idx, amp = line.split(",")
            if int(idx) != lineno - 2:
                raise ValueError(f"line {lineno}: sample_index out of order")
            values.append(float(amp))
        return cls(np.array(values), sample_rate)

    def to_bytes(self) -> bytes:
        return WAVEFORM_MAGIC + struct.pack("<d", self.sample_rate) + self.samples.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Waveform":
        if len(data) < 16 or data[:8] != WAVEFORM_MAGIC:
            raise ValueError("not a QRFOLWF1 waveform file")
        if (len(data) - 16) % 8:
            raise ValueError("truncated waveform payload")
        (rate,) = struct.unpack("<d", data[8:16])
        return cls(np.frombuffer(data, dtype="<f8", offset=16).astype(np.float64), rate)

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".csv":
            path.write_text(self.to_csv())
        else:
            path.write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path, sample_rate: float | None = None) -> "Waveform":
        path = Path(path)
        if path.suffix == ".csv":
            if sample_rate is None:
                raise ValueError("CSV waveforms carry no sample rate; pass sample_rate")
            return cls.from_csv(path.read_text(), sample_rate)
        return cls.from_bytes(path.read_bytes())


WAVEFORM_MAGIC = b"QRFOLWF1"


@dataclass(frozen=True)
class ModemConfig:
    scheme: Scheme = Scheme.BPSK
    carrier_hz: float = 43e6
    mark_hz: float = 53e6
    space_hz: float = 33e6
    bit_rate: float = 20e6
    sample_rate: float = 400e6
    amplitude: float = 1.0
    preamble: tuple[int, ...] = DEFAULT_PREAMBLE
    band_low: float = 23e6
    band_high: float = 63e6
    sync_threshold: float = 0.5
    sync_window: int | None = None  # max frame offset searched; default = preamble length
    max_bits: int = 10**8
    _spb: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        object.__setattr__(self, "preamble", tuple(int(b) for b in self.preamble))
        if not self.bit_rate > 0:
            raise ConfigError("modem.bit_rate", "must be > 0")
        if not self.sample_rate > 0:
            raise ConfigError("modem.sample_rate", "must be > 0")
        ratio = self.sample_rate / self.bit_rate
        spb = round(ratio)
        if spb < 1 or abs(ratio - spb) > 1e-9 * ratio:
            raise ConfigError("modem.sample_rate", f"sample_rate/bit_rate = {ratio:g} is not a positive integer")
        object.__setattr__(self, "_spb", int(spb))
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ConfigError("modem.amplitude", "must be finite and >= 0")
        if not self.band_low < self.band_high:
            raise ConfigError("modem.band_low", "band_low must be below band_high")
        carriers = {"modem.carrier_hz": self.carrier_hz}
        if self.scheme is Scheme.BFSK:
            carriers = {"modem.mark_hz": self.mark_hz, "modem.space_hz": self.space_hz}
            if self.mark_hz == self.space_hz:
                raise ConfigError("modem.mark_hz", "mark and space must differ")
            # Coherent references stay history-independent only if the tones
            # drift apart by whole cycles per bit.
            h = abs(self.mark_hz - self.space_hz) / self.bit_rate
            if abs(h - round(h)) > 1e-9:
                raise ConfigError("modem.mark_hz", f"|mark-space|/bit_rate = {h:g} must be an integer")
        for path, f in carriers.items():
            if not self.band_low <= f <= self.band_high:
                raise ConfigError(path, f"{f:g} Hz outside passband [{self.band_low:g}, {self.band_high:g}] Hz")
        fmax = max(carriers.values())
        if self.sample_rate < 4 * (fmax + self.bit_rate):
            raise ConfigError("modem.sample_rate",
                              f"needs >= 4*(max carrier + bit_rate) = {4 * (fmax + self.bit_rate):g} Hz")
        if any(b not in (0, 1) for b in self.preamble):
            raise ConfigError("modem.preamble", "bits must be 0 or 1")
        if not 0 < self.sync_threshold <= 1:
            raise ConfigError("modem.sync_threshold", "must lie in (0, 1]")
        if self.sync_window is not None and self.sync_window < 0:
            raise ConfigError("modem.sync_window", "must be >= 0")

    @property
    def samples_per_bit(self) -> int:
        return self._spb

    @property
    def preamble_carrier_hz(self) -> float:
        if self.scheme is Scheme.BFSK:
            return 0.5 * (self.mark_hz + self.space_hz)
        return self.carrier_hz

    @property
    def preamble_samples(self) -> int:
        return len(self.preamble) * self._spb

    @property
    def bask_threshold(self) -> float:
        return self.amplitude * self._spb / 4.0

    def frame_samples(self, n_bits: int) -> int:
        return (len(self.preamble) + n_bits) * self._spb

    def with_amplitude(self, amplitude: float) -> "ModemConfig":
        from dataclasses import replace
        return replace(self, amplitude=float(amplitude))


def _as_bits(bits) -> np.ndarray:
    b = np.asarray(bits)
    if b.ndim != 1:
        raise ValueError("bits must be one-dimensional")
    if b.size and not np.isin(b, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    return b.astype(np.uint8)


def nrz_encode(bits) -> np.ndarray:
    """Bipolar NRZ symbols: 1 -> +1, 0 -> -1."""
    b = _as_bits(bits)
    if b.size == 0:
        raise EmptyPayloadError("cannot encode an empty payload")
    return 2 * b.astype(np.int8) - 1


def nrz_decode(symbols) -> np.ndarray:
    return (np.asarray(symbols) >= 0).astype(np.uint8)


def rasterize(symbols, samples_per_bit: int) -> np.ndarray:
    """Hold each symbol for ``samples_per_bit`` samples."""
    return np.repeat(np.asarray(symbols, dtype=np.float64), samples_per_bit)


def _carrier(freq: float, start: int, count: int, fs: float, phase: float = 0.0) -> np.ndarray:
    n = np.arange(start, start + count, dtype=np.float64)
    return np.cos(2.0 * np.pi * freq * n / fs + phase)


def _bfsk_phase0(cfg: ModemConfig) -> float:
    # Continue the preamble carrier phase (including its last BPSK flip).
    phase = 2.0 * np.pi * cfg.preamble_carrier_hz * cfg.preamble_samples / cfg.sample_rate
    if cfg.preamble and cfg.preamble[-1] == 0:
        phase += np.pi
    return float(np.mod(phase, 2.0 * np.pi))


def _payload_samples(bits: np.ndarray, cfg: ModemConfig) -> np.ndarray:
    ns = cfg.samples_per_bit
    start = cfg.preamble_samples
    A = cfg.amplitude
    if cfg.scheme is Scheme.BPSK:
        return A * rasterize(nrz_encode(bits), ns) * _carrier(cfg.carrier_hz, start, bits.size * ns, cfg.sample_rate)
    if cfg.scheme is Scheme.BASK:
        return A * rasterize(bits, ns) * _carrier(cfg.carrier_hz, start, bits.size * ns, cfg.sample_rate)
    freq = np.where(rasterize(bits, ns) > 0, cfg.mark_hz, cfg.space_hz)
    step = 2.0 * np.pi * freq / cfg.sample_rate
    phase = _bfsk_phase0(cfg) + np.concatenate(([0.0], np.cumsum(step[:-1])))
    return A * np.cos(phase)


def modulate(bits, cfg: ModemConfig) -> Waveform:
    """Frame = BPSK preamble followed by the payload in ``cfg.scheme``."""
    b = _as_bits(bits)
    if b.size == 0:
        raise EmptyPayloadError("cannot modulate an empty payload")
    if b.size > cfg.max_bits:
        raise ConfigError("modem.max_bits", f"payload of {b.size} bits exceeds cap {cfg.max_bits}")
    parts = []
    if cfg.preamble:
        parts.append(preamble_waveform(cfg))
    parts.append(_payload_samples(b, cfg))
    return Waveform(np.concatenate(parts), cfg.sample_rate)


def preamble_waveform(cfg: ModemConfig) -> np.ndarray:
    ns = cfg.samples_per_bit
    d = rasterize(nrz_encode(cfg.preamble), ns)
    return cfg.amplitude * d * _carrier(cfg.preamble_carrier_hz, 0, d.size, cfg.sample_rate)


def _payload_reference(cfg: ModemConfig, n_bits: int) -> np.ndarray:
    ns = cfg.samples_per_bit
    start = cfg.preamble_samples
    if cfg.scheme is Scheme.BFSK:
        phase0 = _bfsk_phase0(cfg)
        mark = _carrier(cfg.mark_hz, 0, n_bits * ns, cfg.sample_rate, phase0)
        space = _carrier(cfg.space_hz, 0, n_bits * ns, cfg.sample_rate, phase0)
        return mark - space
    return _carrier(cfg.carrier_hz, start, n_bits * ns, cfg.sample_rate)


def coherent_demodulate(w: Waveform, cfg: ModemConfig, offset: int = 0,
                        n_bits: int | None = None) -> np.ndarray:
    """Integrate-and-dump soft values for the payload slots of a frame.

    The frame starts at sample ``offset``.  Returns one value per complete
    payload bit slot (or exactly ``n_bits``).  BPSK: A*N_s/2 per 1-bit;
    BFSK: mark minus space correlation; BASK: compare with A*N_s/4.
    """
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform sample rate {w.sample_rate:g} != modem {cfg.sample_rate:g}")
    ns = cfg.samples_per_bit
    start = offset + cfg.preamble_samples
    available = (w.samples.size - start) // ns if w.samples.size > start else 0
    if n_bits is None:
        n_bits = available
    if n_bits < 1 or available < n_bits:
        raise InsufficientDataError(
            f"need {cfg.frame_samples(max(n_bits, 1))} samples from offset {offset}, have {w.samples.size - offset}")
    seg = w.samples[start:start + n_bits * ns]
    ref = _payload_reference(cfg, n_bits)
    return (seg * ref).reshape(n_bits, ns).sum(axis=1)


def sync_metric(w: Waveform, cfg: ModemConfig) -> np.ndarray:
    """Normalized preamble correlation for every candidate frame offset.

    For offset k the receiver integrates each preamble slot against the
    phase-locked reference, giving a vector y(k) of per-bit soft values; the
    metric is the cosine between y(k) and the NRZ preamble pattern.  It is
    ~1 at the true offset for any noise-free amplitude and scales with the
    per-bit SNR rather than the per-sample SNR.
    """
    if not cfg.preamble:
        raise ConfigError("modem.preamble", "synchronization needs a preamble")
    ns = cfg.samples_per_bit
    L = cfg.preamble_samples
    x = w.samples
    if x.size < L:
        raise InsufficientDataError(f"waveform of {x.size} samples is shorter than the preamble ({L})")
    window = L if cfg.sync_window is None else cfg.sync_window
    K = min(window, x.size - L)
    ref = _carrier(cfg.preamble_carrier_hz, 0, L, cfg.sample_rate)
    nb = len(cfg.preamble)
    Y = np.empty((K + 1, nb))
    for m in range(nb):
        lo = m * ns
        Y[:, m] = np.correlate(x[lo:lo + K + ns], ref[lo:lo + ns], mode="valid")
    pattern = nrz_encode(cfg.preamble).astype(np.float64)
    norm = np.linalg.norm(Y, axis=1) * math.sqrt(nb)
    num = Y @ pattern
    with np.errstate(invalid="ignore", divide="ignore"):
        metric = np.where(norm > 0, num / norm, 0.0)
    return metric


def bit_synchronize(w: Waveform, cfg: ModemConfig) -> int:
    """Sample offset of the frame start, by preamble correlation."""
    metric = sync_metric(w, cfg)
    k = int(np.argmax(metric))
    peak = float(metric[k])
    if not peak >= cfg.sync_threshold:
        raise SyncError(f"preamble correlation peak {peak:.3f} at offset {k} below threshold "
                        f"{cfg.sync_threshold:.3f}", peak=peak, offset=k)
    return k


def symbol_decide(soft, cfg: ModemConfig | None = None) -> np.ndarray:
    """Hard decisions; a soft value exactly on the threshold decides 1."""
    s = np.asarray(soft, dtype=np.float64)
    if s.size == 0:
        raise EmptyPayloadError("no soft values to decide")
    threshold = 0.0
    if cfg is not None and cfg.scheme is Scheme.BASK:
        threshold = cfg.bask_threshold
    return (s >= threshold).astype(np.uint8)


def receive(w: Waveform, cfg: ModemConfig, n_bits: int | None = None) -> np.ndarray:
    """Synchronize, demodulate and decide; returns payload bits."""
    offset = bit_synchronize(w, cfg)
    return symbol_decide(coherent_demodulate(w, cfg, offset, n_bits), cfg)


def theoretical_ber(scheme, snr_per_bit):
    """Coherent-detection BER against gamma = Eb/N0 (linear).

    gamma is the energy of a keyed-on bit over N0, so one modulation
    amplitude gives the same gamma for every scheme.
    """
    scheme = Scheme.parse(scheme)
    g = np.asarray(snr_per_bit, dtype=np.float64)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise ValueError("snr_per_bit must be >= 0")
    k = {Scheme.BPSK: 1.0, Scheme.BFSK: 0.5, Scheme.BASK: 0.25}[scheme]
    out = 0.5 * erfc(np.sqrt(k * g))
    return float(out) if out.ndim == 0 else out


def invert_bpsk_ber(ber: float) -> float:
    """gamma such that BPSK BER equals ``ber`` (0 < ber < 0.5)."""
    from scipy.special import erfcinv
    if not 0 < ber < 0.5:
        raise ValueError("ber must lie in (0, 0.5)")
    return float(erfcinv(2.0 * ber) ** 2)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=np.float64) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)
