"""Binary serialization of calibrated detectors (.admf).

Little-endian layout:

    magic "ADMF" | version u16 | precision u8 (0=f32, 1=f64)
    input_dim u16 | layer_count u16 | layer sizes u16 each (all layers)
    threshold f64
    normalizer means, then stds (input_dim values, precision dtype)
    per weight layer: W row-major, then bias (precision dtype)
    crc32 u32 over everything above

The threshold is always stored as f64 so the decision boundary survives
f32 weight quantization. Encoding a decoded blob reproduces it byte for
byte, which makes the format canonical.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .autoencoder import ArchitectureSpec, AutoencoderModel, Normalizer
from .detector import Detector

MAGIC = b"ADMF"
FORMAT_VERSION = 1
_PRECISION_CODE = {"f32": 0, "f64": 1}
_PRECISION_DTYPE = {"f32": "<f4", "f64": "<f8"}
_PRECISION_BYTES = {"f32": 4, "f64": 8}


class ModelFormatError(ValueError):
    """Base class for malformed .admf blobs."""


class BadMagicError(ModelFormatError):
    pass


class UnsupportedVersionError(ModelFormatError):
    pass


class TruncatedBlobError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


def footprint(spec: ArchitectureSpec, precision: str = "f32") -> int:
    """Exact .admf byte size for an architecture, without materializing it."""
    p = _PRECISION_BYTES[precision]
    n_layers = len(spec.layer_sizes)
    # fixed header (19) + sizes + payload + crc
    return 19 + 2 * n_layers + p * (2 * spec.input_dim + spec.n_params) + 4


def _quantize(arr: np.ndarray, dtype: str) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64).astype(dtype)
    if not np.all(np.isfinite(out)):
        raise ValueError("value overflows the requested storage precision")
    return out


def encode(detector: Detector, precision: str = "f32") -> bytes:
    """Serialize a calibrated detector to .admf bytes."""
    if precision not in _PRECISION_CODE:
        raise ValueError(f"unknown precision {precision!r}, expected 'f32' or 'f64'")
    model = detector.model
    sizes = model.spec.layer_sizes
    if any(s > 0xFFFF for s in sizes):
        raise ValueError("layer size exceeds the u16 format limit")
    dtype = _PRECISION_DTYPE[precision]

    parts = [
        MAGIC,
        struct.pack("<HBHH", FORMAT_VERSION, _PRECISION_CODE[precision], sizes[0], len(sizes)),
        struct.pack(f"<{len(sizes)}H", *sizes),
        struct.pack("<d", detector.threshold),
        _quantize(model.normalizer.means, dtype).tobytes(),
        _quantize(model.normalizer.stds, dtype).tobytes(),
    ]
    for w, b in zip(model.weights, model.biases):
        parts.append(_quantize(w, dtype).tobytes())
        parts.append(_quantize(b, dtype).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


@dataclass(frozen=True)
class DecodedModel:
    detector: Detector
    precision: str


def decode(blob: bytes) -> DecodedModel:
    """Parse .admf bytes back into a calibrated detector.

    Raises BadMagicError, UnsupportedVersionError, TruncatedBlobError, or
    ChecksumError; never returns a partially built model.
    """
    if len(blob) < 4:
        raise TruncatedBlobError(f"blob is {len(blob)} bytes, shorter than the magic")
    if blob[:4] != MAGIC:
        raise BadMagicError(f"bad magic {blob[:4]!r}")
    if len(blob) < 11:
        raise TruncatedBlobError("blob ends inside the fixed header")
    version, prec_code, input_dim, layer_count = struct.unpack_from("<HBHH", blob, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"format version {version} is not supported")
    precision = {v: k for k, v in _PRECISION_CODE.items()}.get(prec_code)
    if precision is None:
        raise ModelFormatError(f"unknown precision code {prec_code}")
    if layer_count < 3:
        raise ModelFormatError(f"layer_count {layer_count} is too small for an autoencoder")

    sizes_end = 11 + 2 * layer_count
    if len(blob) < sizes_end:
        raise TruncatedBlobError("blob ends inside the layer size table")
    sizes = list(struct.unpack_from(f"<{layer_count}H", blob, 11))
    if sizes[0] != input_dim or sizes[-1] != input_dim:
        raise ModelFormatError("first and last layer sizes must equal input_dim")

    try:
        spec = ArchitectureSpec(input_dim=input_dim, hidden_sizes=tuple(sizes[1:-1]))
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc

    expected = footprint(spec, precision)
    if len(blob) < expected:
        raise TruncatedBlobError(f"blob is {len(blob)} bytes, expected {expected}")
    if len(blob) > expected:
        raise ModelFormatError(f"blob is {len(blob)} bytes, {len(blob) - expected} trailing")
    stored_crc = struct.unpack_from("<I", blob, expected - 4)[0]
    if stored_crc != zlib.crc32(blob[: expected - 4]):
        raise ChecksumError("crc32 mismatch")

    dtype = _PRECISION_DTYPE[precision]
    width = _PRECISION_BYTES[precision]
    off = sizes_end
    (threshold,) = struct.unpack_from("<d", blob, off)
    off += 8

    def take(count: int) -> np.ndarray:
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off).astype(np.float64)
        off += count * width
        return arr

    means = take(input_dim)
    stds = take(input_dim)
    weights, biases = [], []
    for l in range(layer_count - 1):
        out_n, in_n = sizes[l + 1], sizes[l]
        weights.append(take(out_n * in_n).reshape(out_n, in_n))
        biases.append(take(out_n))

    try:
        model = AutoencoderModel(
            spec=spec,
            weights=tuple(weights),
            biases=tuple(biases),
            normalizer=Normalizer(means=means, stds=stds),
        )
        detector = Detector(model=model, threshold=threshold)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc
    return DecodedModel(detector=detector, precision=precision)


def save_model(detector: Detector, path, precision: str = "f32") -> None:
    with open(path, "wb") as fh:
        fh.write(encode(detector, precision))


def load_model(path) -> DecodedModel:
    with open(path, "rb") as fh:
        return decode(fh.read())
