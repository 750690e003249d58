"""Binary-image payloads: PBM codec, bit mapping and end-to-end transmission."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import NoiseModel, transmit
from .modem import ModemConfig, Waveform, modulate, receive
from .optics import ChannelScenario, EprParams
from .rng import ChannelSeed

MAX_SIDE = 1 << 16
_WHITESPACE = b" \t\n\r\v\f"


class PbmError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class BinaryImage:
    """Row-major 1-bit image; a pixel value of 1 is dark."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        p = np.asarray(self.pixels).reshape(-1)
        if p.size != self.width * self.height:
            raise ValueError(f"expected {self.width * self.height} pixels, got {p.size}")
        if p.size and not np.isin(p, (0, 1)).all():
            raise ValueError("pixels must be 0 or 1")
        object.__setattr__(self, "pixels", p.astype(np.uint8))

    @classmethod
    def from_array(cls, a) -> "BinaryImage":
        a = np.asarray(a)
        return cls(a.shape[1], a.shape[0], a.reshape(-1))

    def to_array(self) -> np.ndarray:
        return self.pixels.reshape(self.height, self.width)

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(self.pixels, other.pixels)


def _skip_space_and_comments(data: bytes, i: int) -> int:
    n = len(data)
    while i < n:
        c = data[i:i + 1]
        if c == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c in _WHITESPACE and c:
            i += 1
        else:
            break
    return i


def _read_uint(data: bytes, i: int, what: str) -> tuple[int, int]:
    i = _skip_space_and_comments(data, i)
    j = i
    while j < len(data) and data[j:j + 1].isdigit():
        j += 1
    if j == i:
        raise PbmError(f"expected {what}", i)
    value = int(data[i:j])
    if value < 1 or value > MAX_SIDE:
        raise PbmError(f"{what} {value} outside [1, {MAX_SIDE}]", i)
    return value, j


def load_pbm(data: bytes) -> BinaryImage:
    """Parse a P1 (ASCII) or P4 (binary) PBM payload."""
    if len(data) < 2 or data[:1] != b"P" or data[1:2] not in (b"1", b"4"):
        raise PbmError("missing P1/P4 magic number", 0)
    binary = data[1:2] == b"4"
    width, i = _read_uint(data, 2, "width")
    height, i = _read_uint(data, i, "height")
    if binary:
        if i >= len(data) or data[i:i + 1] not in _WHITESPACE:
            raise PbmError("expected single whitespace before raster", i)
        i += 1
        row_bytes = (width + 7) // 8
        need = row_bytes * height
        raster = np.frombuffer(data, dtype=np.uint8, count=min(need, len(data) - i), offset=i)
        if raster.size < need:
            raise PbmError(f"truncated raster: need {need} bytes, have {raster.size}", len(data))
        bits = np.unpackbits(raster.reshape(height, row_bytes), axis=1)[:, :width]
        return BinaryImage(width, height, bits.reshape(-1))
    count = width * height
    pixels = np.empty(count, dtype=np.uint8)
    k = 0
    n = len(data)
    while k < count:
        i = _skip_space_and_comments(data, i)
        if i >= n:
            raise PbmError(f"truncated raster: got {k} of {count} pixels", i)
        c = data[i]
        if c not in (0x30, 0x31):
            raise PbmError(f"invalid pixel character {chr(c)!r}", i)
        pixels[k] = c - 0x30
        k += 1
        i += 1
    return BinaryImage(width, height, pixels)


def save_pbm(image: BinaryImage, comment: str | None = "qrfol binary image") -> bytes:
    """Encode as P4 with one comment line."""
    header = b"P4\n"
    if comment is not None:
        header += b"# " + comment.replace("\n", " ").encode("utf-8") + b"\n"
    header += f"{image.width} {image.height}\n".encode()
    raster = np.packbits(image.to_array(), axis=1)
    return header + raster.tobytes()


def image_to_bits(image: BinaryImage) -> np.ndarray:
    return image.pixels.copy()


def bits_to_image(bits, width: int, height: int) -> BinaryImage:
    b = np.asarray(bits).reshape(-1)
    if b.size != width * height:
        raise ValueError(f"{b.size} bits cannot fill a {width}x{height} image")
    return BinaryImage(width, height, b)


def default_test_image(width: int = 250, height: int = 400) -> BinaryImage:
    """Two-tone geometric pattern: frame, disc, ring, stripes and a checker patch."""
    y, x = np.mgrid[0:height, 0:width]
    img = np.zeros((height, width), dtype=bool)
    img |= (x < 6) | (x >= width - 6) | (y < 6) | (y >= height - 6)
    cx, cy = width / 2, height * 0.3
    rad = np.hypot(x - cx, y - cy)
    scale = min(width, height)
    img |= rad < 0.22 * scale
    img |= (rad > 0.30 * scale) & (rad < 0.34 * scale)
    band = (y > 0.58 * height) & (y < 0.78 * height)
    img |= band & (((x + y) // 12) % 2 == 0)
    patch = (y >= 0.83 * height) & (y < 0.93 * height) & (x > 0.2 * width) & (x < 0.8 * width)
    img |= patch & (((x // 8) + (y // 8)) % 2 == 0)
    return BinaryImage.from_array(img.astype(np.uint8))


@dataclass(frozen=True)
class ImageTransmission:
    received: BinaryImage
    pixel_errors: int
    pixel_error_rate: float
    quadrature: str
    scenario: str


def _send_bits(bits: np.ndarray, quadrature: str, cfg: ModemConfig, scenario, params, seed: ChannelSeed,
               noise: NoiseModel | None) -> np.ndarray:
    tx = modulate(bits, cfg)
    idle = Waveform(np.zeros(len(tx)), tx.sample_rate)
    pair = (tx, idle) if quadrature == "x" else (idle, tx)
    rx_x, rx_y = transmit(*pair, scenario, params, seed, noise=noise)
    return receive(rx_x if quadrature == "x" else rx_y, cfg, bits.size)


def transmit_image(image: BinaryImage, cfg: ModemConfig, scenario, params: EprParams | None,
                   seed: ChannelSeed, *, quadrature: str = "x",
                   noise: NoiseModel | None = None) -> ImageTransmission:
    """Send the image row-major through modem and channel.

    ``quadrature='dual'`` splits the bits: the first half rides on x, the
    rest on y, each in its own frame and noise stream.
    """
    scenario = ChannelScenario.of(scenario)
    if noise is None:
        noise = NoiseModel.for_scenario(scenario, params or EprParams())
    bits = image_to_bits(image)
    if quadrature in ("x", "y"):
        got = _send_bits(bits, quadrature, cfg, scenario, params, seed, noise)
    elif quadrature == "dual":
        half = (bits.size + 1) // 2
        parts = [_send_bits(bits[:half], "x", cfg, scenario, params, seed, noise)]
        if bits.size > half:
            parts.append(_send_bits(bits[half:], "y", cfg, scenario, params, seed.substream(2), noise))
        got = np.concatenate(parts)
    else:
        raise ValueError("quadrature must be 'x', 'y' or 'dual'")
    received = bits_to_image(got, image.width, image.height)
    errors = int(np.count_nonzero(received.pixels != image.pixels))
    return ImageTransmission(received, errors, errors / bits.size, quadrature, scenario.name)


def pixel_error_rate(original: BinaryImage, received: BinaryImage) -> float:
    if (original.width, original.height) != (received.width, received.height):
        raise ValueError("image dimensions differ")
    return int(np.count_nonzero(original.pixels != received.pixels)) / original.pixels.size


def write_received(path, result: ImageTransmission, metadata: dict) -> Path:
    """Write the received PBM plus a JSON sidecar; returns the sidecar path."""
    path = Path(path)
    comment = f"qrfol received scenario={result.scenario} quadrature={result.quadrature}"
    path.write_bytes(save_pbm(result.received, comment))
    sidecar = path.with_suffix(path.suffix + ".json")
    record = {**metadata, "scenario": result.scenario, "quadrature": result.quadrature,
              "pixel_errors": result.pixel_errors, "pixel_error_rate": result.pixel_error_rate,
              "width": result.received.width, "height": result.received.height}
    sidecar.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return sidecar


def expected_error_band(ber: float, n_pixels: int, k: float = 3.0) -> tuple[float, float]:
    s = math.sqrt(max(ber * (1 - ber), 0.0) / n_pixels)
    return ber - k * s, ber + k * s
