"""Edge-to-fog telemetry datagrams.

One packet per tick, little-endian, 25 + 4*feature_count bytes on the wire:

    magic 0xAD 0x01 | device_id u32 | seq u32 | timestamp_ms u64
    flags u8 (bit 0 = stale GNSS fix) | feature_count u8
    features f32 each (raw, unnormalized)
    edge_is_anomaly u8 | edge_confidence f32

Decoding raises typed errors and never throws past them, whatever bytes
arrive. Confidence is rejected unless it lies in [0.5, 1.0); the range
check is written to also reject NaN.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"\xad\x01"
DEFAULT_PORT = 47808
MAX_FEATURES = 64
STALE_GNSS_FLAG = 0x01

# largest f32 strictly below 1.0
MAX_WIRE_CONFIDENCE = float(np.nextafter(np.float32(1.0), np.float32(0.0)))

_HEADER = struct.Struct("<IIQBB")  # device_id, seq, timestamp_ms, flags, feature_count
_TRAILER = struct.Struct("<Bf")  # edge_is_anomaly, edge_confidence


class WireFormatError(ValueError):
    """Base class for malformed telemetry datagrams."""


class WireMagicError(WireFormatError):
    pass


class WireTruncatedError(WireFormatError):
    pass


class WireLengthError(WireFormatError):
    pass


class ConfidenceRangeError(WireFormatError):
    pass


def quantize_confidence(c: float) -> float:
    """Round a confidence to f32 and clamp into the wire range [0.5, 1.0)."""
    c = float(c)
    if not c >= 0.5:  # also catches NaN
        return 0.5
    if c >= 1.0:
        return MAX_WIRE_CONFIDENCE
    return min(float(np.float32(c)), MAX_WIRE_CONFIDENCE)


def packet_size(feature_count: int) -> int:
    return 25 + 4 * feature_count


@dataclass(frozen=True)
class TelemetryPacket:
    """One tick of device telemetry plus the edge verdict riding along.

    Features and confidence are stored at f32 resolution, so a packet is
    equal to its own encode/decode round trip.
    """

    device_id: int
    seq: int
    timestamp_ms: int
    features: tuple[float, ...]
    edge_is_anomaly: bool
    edge_confidence: float
    flags: int = 0

    def __post_init__(self):
        if not (0 <= self.device_id <= 0xFFFFFFFF and 0 <= self.seq <= 0xFFFFFFFF):
            raise WireFormatError("device_id and seq must fit in u32")
        if not 0 <= self.timestamp_ms <= 0xFFFFFFFFFFFFFFFF:
            raise WireFormatError("timestamp_ms must fit in u64")
        if not 0 <= self.flags <= 0xFF:
            raise WireFormatError("flags must fit in u8")
        if len(self.features) > MAX_FEATURES:
            raise WireLengthError(f"{len(self.features)} features exceeds the limit of {MAX_FEATURES}")
        feats = tuple(float(np.float32(f)) for f in self.features)
        if not all(np.isfinite(feats)):
            raise WireFormatError("features must be finite at f32 resolution")
        object.__setattr__(self, "features", feats)
        conf = float(np.float32(self.edge_confidence))
        if not (0.5 <= conf < 1.0):
            raise ConfidenceRangeError(f"edge confidence {conf} outside [0.5, 1.0)")
        object.__setattr__(self, "edge_confidence", conf)
        object.__setattr__(self, "edge_is_anomaly", bool(self.edge_is_anomaly))

    @property
    def stale_gnss(self) -> bool:
        return bool(self.flags & STALE_GNSS_FLAG)


def encode_packet(pkt: TelemetryPacket) -> bytes:
    fc = len(pkt.features)
    return b"".join(
        (
            MAGIC,
            _HEADER.pack(pkt.device_id, pkt.seq, pkt.timestamp_ms, pkt.flags, fc),
            struct.pack(f"<{fc}f", *pkt.features),
            _TRAILER.pack(int(pkt.edge_is_anomaly), pkt.edge_confidence),
        )
    )


def decode_packet(blob: bytes) -> TelemetryPacket:
    """Parse one datagram; raises a WireFormatError subclass on any defect."""
    if len(blob) < 2:
        raise WireTruncatedError(f"datagram is {len(blob)} bytes, shorter than the magic")
    if blob[:2] != MAGIC:
        raise WireMagicError(f"bad magic {blob[:2]!r}")
    if len(blob) < 2 + _HEADER.size:
        raise WireTruncatedError("datagram ends inside the fixed header")
    device_id, seq, timestamp_ms, flags, fc = _HEADER.unpack_from(blob, 2)
    if fc > MAX_FEATURES:
        raise WireLengthError(f"feature_count {fc} exceeds the limit of {MAX_FEATURES}")
    expected = packet_size(fc)
    if len(blob) < expected:
        raise WireTruncatedError(f"datagram is {len(blob)} bytes, expected {expected}")
    if len(blob) > expected:
        raise WireLengthError(f"datagram is {len(blob)} bytes, expected {expected}")
    features = struct.unpack_from(f"<{fc}f", blob, 2 + _HEADER.size)
    anomaly_byte, confidence = _TRAILER.unpack_from(blob, expected - _TRAILER.size)
    if anomaly_byte not in (0, 1):
        raise WireFormatError(f"edge_is_anomaly byte must be 0 or 1, got {anomaly_byte}")
    confidence = float(confidence)
    if not (0.5 <= confidence < 1.0):
        raise ConfidenceRangeError(f"edge confidence {confidence} outside [0.5, 1.0)")
    return TelemetryPacket(
        device_id=device_id,
        seq=seq,
        timestamp_ms=timestamp_ms,
        features=features,
        edge_is_anomaly=bool(anomaly_byte),
        edge_confidence=confidence,
        flags=flags,
    )
